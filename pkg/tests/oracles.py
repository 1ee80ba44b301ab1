"""Closed forms derived by hand, kept apart from the enumeration engine."""
from math import comb


def binom_tail_above_half(n, p):
    """P(Binomial(n, p) > n / 2)."""
    return sum(comb(n, k) * p ** k * (1 - p) ** (n - k) for k in range(n // 2 + 1, n + 1))


def closed_form(token, f, a):
    """(fp, fn counting Neutral as negative, p_neutral)."""
    if token in ("single", "alternating"):
        return f * (1 - a), f * a, 0.0
    if token == "conj2":
        return f * f * (1 - a) ** 2, f * a * (2 - f * a), 0.0
    if token == "disj2":
        return f * (1 - a) * (f * (1 + a) + 2 * (1 - f)), f * f * a * a, 0.0
    if token == "guarded2":
        return 0.0, f * (2 - f), f * (2 - f)
    if token.startswith("majbool"):
        n = int(token[7:])
        # below a only a defective sensor reading above a votes yes; above a
        # only a defective sensor reading below a votes no
        return binom_tail_above_half(n, f * (1 - a)), binom_tail_above_half(n, f * a), 0.0
    if token.startswith("majgate"):
        n = int(token[7:])
        no_pair = f ** n + n * f ** (n - 1) * (1 - f)
        return 0.0, no_pair, no_pair
    raise KeyError(token)
