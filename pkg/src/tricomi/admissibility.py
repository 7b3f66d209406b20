"""Exponent calculus and iteration-regime classification.

All derived exponents for a parameter tuple (n, l, s, mu):

    p0 = 2n/(n-2s)                      Sobolev embedding exponent of the data
    Q0 = 1 + n(2l+1)/2                  homogeneous dimension, nu = 0
    Q_nu = 1 + n(2l+1-nu)/2             homogeneous dimension, weighted
    1/p1 = 1/2 - (s - 2/(2l+1))/n       slope-trace exponent
    1/q0 = 1/2 - (s - (2l+3)/(2(2l+1)))/n
    1/p2 = mu/p0 - 1/Q0                 (defined when positive; regime A)
    1/r1 = (mu-1)/p0 + 1/p2
    1/theta = 1/p2 - 1/Q1, 1/Theta = 1/r1 - 1/Q1

The solvability gate admits 0 <= mu <= 1 outright, and 1 < mu < p0 only
when Q0 <= p0/(mu-1).  Admissible profiles fall into exactly one of nine
regime cases (three coarse regimes A/B/C by p0/mu vs Q0); boundary cases
are equalities, so everything is computed in exact rational arithmetic
whenever the inputs are rational -- float ties would misclassify.

The printed header of case 8 in the source material reads
"p0/mu < Q0 <= p0/mu", which is vacuous; it is classified here with the
evident correction p0/mu < Q0 <= p0/(mu-1), and flagged.
"""

from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError

__all__ = [
    "ExponentProfile",
    "CaseLabel",
    "GateDecision",
    "exponent_profile",
    "solvability_gate",
    "classify_case",
    "case_predicates",
    "divergence_demo",
    "c1_regularity_exponents",
]

_CASE_SPACES = {1: "M1", 2: "M1", 3: "M1", 4: "M1", 5: "M2",
                6: "M3", 7: "M4", 8: "M4", 9: "M4"}

INF = Fraction(10 ** 12)  # sentinel for +infinity reciprocal handling


def _to_fraction(x, name):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10 ** 12) if not x.is_integer() else Fraction(int(x))
    raise DomainError(f"{name} must be rational (int, Fraction, str or float)")


@dataclass(frozen=True)
class ExponentProfile:
    """Derived exponents; reciprocals are exact Fractions, None = undefined."""

    n: int
    l: int
    s: Fraction
    mu: Fraction
    p0: Fraction
    p1: Fraction
    q0: Fraction
    Q0: Fraction
    Q1: Fraction
    inv_p2: Fraction        # may be <= 0: p2 undefined (regime B/C quantities only)
    inv_r1: Fraction
    flags: tuple

    @property
    def p2(self):
        return 1 / self.inv_p2 if self.inv_p2 > 0 else None

    @property
    def r1(self):
        return 1 / self.inv_r1 if self.inv_r1 > 0 else None

    @property
    def theta(self):
        if self.p2 is None:
            return None
        inv = self.inv_p2 - 1 / self.Q1
        return 1 / inv if inv > 0 else None

    @property
    def big_theta(self):
        if self.r1 is None:
            return None
        inv = self.inv_r1 - 1 / self.Q1
        return 1 / inv if inv > 0 else None

    def Qnu(self, nu):
        nu = _to_fraction(nu, "nu")
        return 1 + Fraction(self.n) * (2 * self.l + 1 - nu) / 2

    def p0_over_mu(self):
        """p0/mu, with mu = 0 mapped to the +infinity sentinel."""
        return self.p0 / self.mu if self.mu > 0 else INF

    def table(self):
        def fmt(v):
            return "undefined" if v is None else f"{v} = {float(v):.6g}"

        return [
            ("p0", fmt(self.p0)), ("p1", fmt(self.p1)), ("q0", fmt(self.q0)),
            ("Q0", fmt(self.Q0)), ("Q1", fmt(self.Q1)),
            ("p2", fmt(self.p2)), ("r1", fmt(self.r1)),
            ("theta", fmt(self.theta)), ("Theta", fmt(self.big_theta)),
        ]


def exponent_profile(n, l, s, mu):
    """Build the full exponent profile for (n, l, s, mu)."""
    if not (isinstance(n, int) and n >= 1):
        raise DomainError("n must be an integer >= 1")
    if not (isinstance(l, int) and l >= 1):
        raise DomainError("l must be an integer >= 1")
    s = _to_fraction(s, "s")
    mu = _to_fraction(mu, "mu")
    flags = []
    if n == 1:
        flags.append("n=1 is outside the analyzed range n >= 2; proceeding anyway")
    if s < 0 or 2 * s >= n:
        raise DomainError(f"need 0 <= s < n/2; got s={s}, n={n}")
    if mu < 0:
        raise DomainError("mu must be >= 0")

    p0 = Fraction(2 * n, 1) / (n - 2 * s)
    Q0 = 1 + Fraction(n * (2 * l + 1), 2)
    Q1 = 1 + Fraction(n * 2 * l, 2)
    inv_p1 = Fraction(1, 2) - (s - Fraction(2, 2 * l + 1)) / n
    inv_q0 = Fraction(1, 2) - (s - Fraction(2 * l + 3, 2 * (2 * l + 1))) / n
    inv_p2 = mu / p0 - 1 / Q0
    inv_r1 = (2 * mu - 1) / p0 - 1 / Q0
    if inv_p2 <= 0:
        flags.append("p2 undefined (mu/p0 <= 1/Q0): regime B/C quantities only")
    return ExponentProfile(n=n, l=l, s=s, mu=mu, p0=p0, p1=1 / inv_p1,
                           q0=1 / inv_q0, Q0=Q0, Q1=Q1, inv_p2=inv_p2,
                           inv_r1=inv_r1, flags=tuple(flags))


@dataclass(frozen=True)
class GateDecision:
    admissible: bool
    reason: str


def solvability_gate(profile: ExponentProfile) -> GateDecision:
    """Local solvability: 0 <= mu <= 1, or 1 < mu < p0 with Q0 <= p0/(mu-1)."""
    mu, p0, Q0 = profile.mu, profile.p0, profile.Q0
    if mu <= 1:
        return GateDecision(True, "0 <= mu <= 1 (sublinear/linear growth branch)")
    if mu >= p0:
        return GateDecision(False, f"mu < p0 violated: mu={mu} >= p0={p0}")
    if Q0 <= p0 / (mu - 1):
        return GateDecision(True,
                            f"1 < mu < p0 and Q_0 <= p_0/(mu-1): {Q0} <= {p0/(mu-1)}")
    return GateDecision(False,
                        f"Q_0 <= p_0/(mu-1) violated: Q0={Q0} > {p0/(mu-1)}")


@dataclass(frozen=True)
class CaseLabel:
    regime: str      # A, B or C by p0/mu vs Q0
    case_id: int     # 1..9
    target_space: str
    notes: tuple = ()


def classify_case(profile: ExponentProfile) -> CaseLabel:
    """Exactly one of the nine iteration cases for an admissible profile."""
    gate = solvability_gate(profile)
    if not gate.admissible:
        raise DomainError(f"inadmissible profile: {gate.reason}")
    mu, Q0, Q1 = profile.mu, profile.Q0, profile.Q1
    pa = profile.p0_over_mu()
    notes = []
    if mu == 0:
        notes.append("mu = 0 treated as p0/mu = +inf (linear-forcing convention)")

    if pa == Q0:
        return CaseLabel("C", 7, _CASE_SPACES[7], tuple(notes))
    if pa > Q0:
        cid = 1 if mu > 1 else 4
        return CaseLabel("B", cid, _CASE_SPACES[cid], tuple(notes))
    # regime A: p0/mu < Q0 (gate guarantees Q0 <= p0/(mu-1) when mu > 1)
    if mu > 1:
        r1 = profile.r1
        if r1 > Q1:
            cid = 2
        elif r1 < Q1:
            cid = 6
        else:
            cid = 8
            notes.append("case 8 header corrected to p0/mu < Q0 <= p0/(mu-1)")
    else:
        p2 = profile.p2
        if p2 > Q1:
            cid = 3
        elif p2 < Q1:
            cid = 5
        else:
            cid = 9
    return CaseLabel("A", cid, _CASE_SPACES[cid], tuple(notes))


def case_predicates(profile: ExponentProfile):
    """Raw per-case headers as independent predicates (case 8 corrected).

    Used by the partition property test: for every admissible profile
    with mu > 0 exactly one predicate holds.
    """
    mu, Q0, Q1 = profile.mu, profile.Q0, profile.Q1
    p0 = profile.p0
    pa = profile.p0_over_mu()
    in_a = pa < Q0 and (mu <= 1 or Q0 <= p0 / (mu - 1))
    r1, p2 = profile.r1, profile.p2
    return {
        1: 1 < mu < p0 and Q0 < pa,
        2: 1 < mu < p0 and in_a and pa < Q0 and r1 is not None and r1 > Q1,
        3: 0 < mu <= 1 and Q0 > pa and p2 is not None and p2 > Q1,
        4: 0 < mu <= 1 and Q0 < pa,
        5: 0 < mu <= 1 and Q0 > pa and p2 is not None and Q1 > p2,
        6: 1 < mu < p0 and in_a and r1 is not None and Q1 > r1,
        7: 0 < mu < p0 and Q0 == pa,
        8: 1 < mu < p0 and in_a and r1 is not None and Q1 == r1,
        9: 0 < mu <= 1 and Q0 > pa and p2 is not None and Q1 == p2,
    }


def divergence_demo(profile: ExponentProfile, q1=None, steps=25):
    """Trajectory of the naive-iteration exponent recursion.

    1/q_(k+1) = mu/q_k - 1/Q1 starting from q1 (default p1).  Returns
    (list of 1/q_k as Fractions, index of first invalid step or None);
    invalid means 1/q_k >= 1 (q_k <= 1) or 1/q_k <= 0.
    """
    mu, Q1 = profile.mu, profile.Q1
    inv = 1 / (_to_fraction(q1, "q1") if q1 is not None else profile.p1)
    if inv >= 1 or inv <= 0:
        raise DomainError("q1 must exceed 1")
    seq = [inv]
    first_bad = None
    for k in range(1, steps + 1):
        inv = mu * inv - Fraction(1) / Q1
        seq.append(inv)
        if first_bad is None and (inv >= 1 or inv <= 0):
            first_bad = k
    return seq, first_bad


def c1_regularity_exponents(l):
    """Both C^1 trace exponents of the linear mixed evolution.

    The two-sided statement uses gamma - (2l+3)/(2(2l+1)); the elliptic
    half alone gives the stronger gamma - 2/(2l+1).  The discrepancy is
    real (the hyperbolic side is the weaker one) and both values are
    reported wherever regularity is printed.
    """
    if l < 1:
        raise DomainError("l must be >= 1")
    stated = Fraction(2 * l + 3, 2 * (2 * l + 1))
    elliptic = Fraction(2, 2 * l + 1)
    return {"stated_loss": stated, "elliptic_side_loss": elliptic,
            "note": "stated C1 loss exceeds the elliptic-side proof value; "
                    "the hyperbolic half is the binding one"}
