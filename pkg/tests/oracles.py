"""Reference computations that share no code with the package.

Everything here is deliberately written with plain Python loops and the
``math`` module so that it can check the vectorised library paths.
"""

import math
import random


# ---------------------------------------------------------------- expressions

def reference_eval(node, t):
    """Tree-walking scalar evaluator over the package's AST node classes.

    Returns None where the expression is undefined (the library must raise).
    """
    kind = type(node).__name__
    if kind == "Num":
        return node.value
    if kind == "Var":
        return t
    if kind == "Const":
        return {"pi": math.pi, "e": math.e}[node.name]
    if kind == "Neg":
        v = reference_eval(node.operand, t)
        return None if v is None else -v
    if kind == "BinOp":
        a = reference_eval(node.left, t)
        b = reference_eval(node.right, t)
        if a is None or b is None:
            return None
        try:
            if node.op == "+":
                r = a + b
            elif node.op == "-":
                r = a - b
            elif node.op == "*":
                r = a * b
            elif node.op == "/":
                if b == 0:
                    return None
                r = a / b
            else:
                r = math.pow(a, b)
        except (OverflowError, ValueError, ZeroDivisionError):
            return None
        return r if math.isfinite(r) else None
    if kind == "Call":
        args = [reference_eval(a, t) for a in node.args]
        if any(v is None for v in args):
            return None
        x = args[0]
        try:
            if node.name == "min":
                return min(x, args[1])
            if node.name == "max":
                return max(x, args[1])
            if node.name == "log" and x <= 0:
                return None
            if node.name == "sqrt" and x < 0:
                return None
            r = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
                 "log": math.log, "sqrt": math.sqrt, "abs": abs}[node.name](x)
        except (OverflowError, ValueError):
            return None
        return r if math.isfinite(r) else None
    raise TypeError(kind)


# ------------------------------------------------------------------ quadrature

def simpson(f, a, b, panels):
    """Composite Simpson rule with an even number of panels."""
    if b == a:
        return 0.0
    if panels % 2:
        panels += 1
    h = (b - a) / panels
    total = f(a) + f(b)
    for i in range(1, panels):
        total += (4 if i % 2 else 2) * f(a + i * h)
    return total * h / 3.0


def scalar_alpha_simpson(a, b, h, r, t, step):
    """Nested integral defining alpha for constant scalar coefficients,
    evaluated at time t with Simpson's rule of step ``step``."""
    d = a + b

    def inner(s, adv):
        return simpson(lambda u: abs(a) + abs(b), s, s + adv, max(2, round(adv / step)))

    def integrand(s):
        phi = math.exp(-d * (t - s))
        return phi * (abs(a) * inner(s, h) + abs(b) * inner(s, r))

    return simpson(integrand, 0.0, t, max(2, round(t / step)))


def scalar_H_simpson(a, b, h, r, x, x0, t, step):
    """(Hx)(t) for x' + a x(t+h) + b x(t+r) = 0 with constant scalars, analytic
    Phi(t,s) = exp(-(a+b)(t-s)) and a callable x, by nested Simpson."""
    d = a + b

    def E(u):
        return a * x(u + h) + b * x(u + r)

    def integrand(s):
        ih = simpson(E, s, s + h, max(2, round(h / step))) if h > 0 else 0.0
        ir = simpson(E, s, s + r, max(2, round(r / step))) if r > 0 else 0.0
        return math.exp(-d * (t - s)) * (a * ih + b * ir)

    return math.exp(-d * t) * x0 + simpson(integrand, 0.0, t, max(2, round(t / step)))


# --------------------------------------------- loop-based scalar re-implementation

class ScalarReference:
    """Scalar (n = 1) version of the whole pipeline written with explicit loops.

    Uses the same discretisation as the library (RK4 fundamental solution,
    trapezoid rules with grid nodes plus exact endpoints, linear
    interpolation, hold/zero extension) so the two agree to rounding.
    """

    def __init__(self, coeffs, advances, t0, dt, size, extension="hold"):
        self.a = coeffs          # list of callables a_j(t)
        self.h = advances        # list of callables h_j(t)
        self.t0, self.dt, self.size = t0, dt, size
        self.extension = extension
        self.times = [t0 + k * dt for k in range(size)]
        self.phi = self._fundamental()

    def drift(self, t):
        return -sum(a(t) for a in self.a)

    def _fundamental(self):
        phi = [1.0]
        dt = self.dt
        for k in range(self.size - 1):
            t = self.times[k]
            y = phi[-1]
            k1 = self.drift(t) * y
            k2 = self.drift(t + dt / 2) * (y + dt / 2 * k1)
            k3 = self.drift(t + dt / 2) * (y + dt / 2 * k2)
            k4 = self.drift(t + dt) * (y + dt * k3)
            phi.append(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
        return phi

    def read(self, values, t):
        x = (t - self.t0) / self.dt
        if abs(x - round(x)) < 1e-9:
            x = float(round(x))
        last = self.size - 1
        if x > last:
            return values[last] if self.extension == "hold" else 0.0
        i = min(int(math.floor(x)), last - 1)
        w = x - i
        return (1 - w) * values[i] + w * values[i + 1]

    def E(self, values, u):
        return sum(a(u) * self.read(values, u + h(u)) for a, h in zip(self.a, self.h))

    def _inner(self, f, s):
        # trapezoid over s, grid points in (s, s+h], and the endpoint s+h
        out = []
        for h in self.h:
            e = s + h(s)
            nodes = [s]
            k = round((s - self.t0) / self.dt) + 1
            while self.t0 + k * self.dt <= e + 1e-9 * self.dt:
                nodes.append(self.t0 + k * self.dt)
                k += 1
            if e - nodes[-1] > 0:
                nodes.append(e)
            vals = [f(u) for u in nodes]
            out.append(sum(0.5 * (nodes[i + 1] - nodes[i]) * (vals[i] + vals[i + 1])
                           for i in range(len(nodes) - 1)))
        return out

    def apply_H(self, values, x0):
        forcing = []
        for s in self.times:
            inner = self._inner(lambda u: self.E(values, u), s)
            forcing.append(sum(a(s) * I for a, I in zip(self.a, inner)))
        out = []
        for k in range(self.size):
            acc = 0.0
            for i in range(k):
                f0 = self.phi[k] / self.phi[i] * forcing[i]
                f1 = self.phi[k] / self.phi[i + 1] * forcing[i + 1]
                acc += 0.5 * self.dt * (f0 + f1)
            out.append(self.phi[k] * x0 + acc)
        out[0] = x0
        return out

    def alpha(self, last):
        weights = []
        for s in self.times:
            inner = self._inner(lambda u: sum(abs(a(u)) for a in self.a), s)
            weights.append(sum(abs(a(s)) * I for a, I in zip(self.a, inner)))
        best = 0.0
        for k in range(last + 1):
            acc = 0.0
            for i in range(k):
                f0 = abs(self.phi[k] / self.phi[i]) * weights[i]
                f1 = abs(self.phi[k] / self.phi[i + 1]) * weights[i + 1]
                acc += 0.5 * self.dt * (f0 + f1)
            best = max(best, acc)
        return best

    def K(self):
        return max(abs(self.phi[j] / self.phi[i])
                   for j in range(self.size) for i in range(j + 1))

    def picard(self, x0, window, tol, max_iter=200):
        values = [p * x0 for p in self.phi]
        for it in range(1, max_iter + 1):
            new = self.apply_H(values, x0)
            res = max(abs(new[k] - values[k]) for k in range(window + 1))
            values = new
            if res <= tol:
                return values, it
        raise RuntimeError("reference Picard iteration did not converge")


# ------------------------------------------------------------------- matrices

def brute_inf_norm(m):
    return max(sum(abs(v) for v in row) for row in m)


def random_matrix(rng: random.Random, n, scale=1.0):
    return [[rng.uniform(-scale, scale) for _ in range(n)] for _ in range(n)]
