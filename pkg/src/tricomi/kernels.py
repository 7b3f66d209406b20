"""Numerical verification of the Fourier-side kernel integrals and bounds.

The object under test is K_hat(t, sigma, s) = s^(m+2) t^(m-nu) sigma^nu
T_hat(t, sigma, s) (nu = m recovers the unweighted kernel).  Checks:

* row integral: integral over sigma of K_hat equals 1 - lambda(ts)
  exactly -- the one identity (not just bound) available at desk scale;
* column integral: integral over t is finite, uniformly in (sigma, s);
* band-localized bounds: for a bump h supported on (a-b, a+b), the
  t-integral of |integral K_hat h dsigma| over various regions is
  dominated by explicit envelope functions of (as, bs):

      off-band, plain bump:      P1(A, B) = exp(-c A^(m/2) B)
      full line, mean-zero bump: P2(A, B) = B A^(m/2) + B^2 A^m + B^3 A^(3m/2)
      tail (a+b, inf), mean-zero, weighted kernel:
                                 P5(A, B) = A if A <= 1 else B A^(m/2)
      full line, mean-zero, weighted kernel:
                                 P6 = P5 + B A^(m/2) + B^2 A^m

The multiplicative constants are never quantified by the theory, so each
family fits its constant on a calibration grid and then asserts the
bound with that frozen constant on a disjoint validation grid; that
turns existence-of-C statements into falsifiable checks.  Measured
integrals depend on (as, bs) only, which the probe grids exercise by
drawing s independently of (a, b).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import duhamel_kernel_T
from .errors import AccuracyError, DomainError
from .quadrature import PanelRule, geometric_breakpoints
from .specfun import lambda_value, log_lambda

__all__ = [
    "ProbeGrid",
    "BumpFamily",
    "BoundCheck",
    "KernelProbeReport",
    "khat",
    "check_row_integral",
    "check_column_integral",
    "check_offband_bound",
    "check_meanzero_bound",
    "check_weighted_bounds",
    "fit_exponential_envelope",
    "fit_constant_envelope",
    "run_kernel_verification",
]


@dataclass(frozen=True)
class ProbeGrid:
    """Positive probe values; off-band probes keep b/a <= 1/2 so the
    left band (0, a-2b) is nonempty."""

    a_values: tuple
    b_values: tuple
    s_values: tuple
    t_values: tuple = ()

    def __post_init__(self):
        for name in ("a_values", "b_values", "s_values", "t_values"):
            vals = getattr(self, name)
            if any(v <= 0 for v in vals):
                raise DomainError(f"{name} must be positive")

    def band_probes(self, max_ratio=0.5):
        out = []
        for a in self.a_values:
            for b in self.b_values:
                if b / a <= max_ratio:
                    for s in self.s_values:
                        out.append((a, b, s))
        return out


@dataclass(frozen=True)
class BumpFamily:
    """Smooth compactly supported test profile on (a-b, a+b).

    shape "plain_bump": normalized exp(-1/(1-u^2)), unit mass;
    shape "mean_zero_bump": its derivative, zero mean by construction,
    normalized to unit L^1 mass.
    """

    shape: str
    center: float
    half_width: float
    samples: int = 48

    _PLAIN_MASS = 0.4439938161680794  # integral of exp(-1/(1-u^2)) du over (-1,1)
    _DERIV_ABS_MASS = 2.0 * math.exp(-1.0)  # integral |d/du exp(-1/(1-u^2))| du

    def __post_init__(self):
        if self.shape not in ("plain_bump", "mean_zero_bump"):
            raise DomainError(f"unknown bump shape {self.shape!r}")
        if self.half_width <= 0 or self.center - self.half_width <= 0:
            raise DomainError("bump must sit inside (0, inf)")
        if self.samples < 8:
            raise DomainError("need >= 8 samples")

    def __call__(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        u = (sigma - self.center) / self.half_width
        inside = np.abs(u) < 1.0
        uu = np.where(inside, u, 0.0)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            core = np.where(inside, np.exp(-1.0 / (1.0 - uu * uu)), 0.0)
        if self.shape == "plain_bump":
            return core / (self._PLAIN_MASS * self.half_width)
        deriv = core * (-2.0 * uu / (1.0 - uu * uu) ** 2)
        return np.where(inside, deriv, 0.0) / (self._DERIV_ABS_MASS * self.half_width)

    def l1_mass(self):
        return 1.0

    def rule(self):
        lo = self.center - self.half_width
        hi = self.center + self.half_width
        return PanelRule(np.linspace(lo, hi, 5), max(8, self.samples // 4))


# ---------------------------------------------------------------------------
# kernel and scalar integrals
# ---------------------------------------------------------------------------

def khat(m, nu, t, sigma, s):
    """K_hat(t, sigma, s) = s^(m+2) t^(m-nu) sigma^nu T_hat(t, sigma, s)."""
    if np.any(np.asarray(nu) < 0) or np.any(np.asarray(nu) > m):
        raise DomainError(f"nu={nu} outside [0, m]")
    t = np.asarray(t, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    s = np.asarray(s, dtype=float)
    T = duhamel_kernel_T(m, t, sigma, s)
    return s ** (m + 2) * t ** float(m - nu) * sigma ** float(nu) * T


def _t_cutoff(m, s, lead_scale):
    """Upper t so that lambda(ts)-type integrands fall below 1e-14 of peak."""
    # lambda(y) ~ exp(-(2/(m+2)) y^((m+2)/2)); solve for the 1e-14 tail
    target = 14.0 * math.log(10.0) + math.log(1.0 + lead_scale)
    y = (0.5 * (m + 2) * target) ** (2.0 / (m + 2))
    return max(y / s, 2.0 * lead_scale / s if s > 0 else 1.0)


def _peak_clustered_breakpoints(peak, hi, n_panels):
    """Panels on (0, hi) geometrically refined toward the integrand peak.

    The kernel row/column integrands grow like 1/lambda toward the
    min(t, sigma) crease, so panel widths must shrink approaching it
    from both sides.
    """
    left = peak - geometric_breakpoints(0.0, peak, n_panels)[::-1]
    right = geometric_breakpoints(peak, hi, n_panels)
    return np.unique(np.concatenate((left, right)))


def check_row_integral(m, t, s, n_panels=12, nodes=10):
    """(measured, exact) for integral over sigma of K_hat(nu=m): exact = 1 - lambda(ts)."""
    if t <= 0 or s <= 0:
        return 0.0, 0.0
    hi = max(_t_cutoff(m, s, t * s), 2 * t)
    rule = PanelRule(_peak_clustered_breakpoints(t, hi, n_panels), nodes)
    vals = khat(m, m, t, rule.nodes, s)
    measured = rule.integrate(vals)
    exact = 1.0 - lambda_value(m, t * s)
    return float(measured), float(exact)


def check_column_integral(m, sigma, s, n_panels=12, nodes=10):
    """integral over t of K_hat(nu=m) at fixed (sigma, s); depends on sigma*s only."""
    if sigma <= 0 or s <= 0:
        return 0.0
    hi = max(_t_cutoff(m, s, sigma * s), 3 * sigma)
    rule = PanelRule(_peak_clustered_breakpoints(sigma, hi, n_panels), nodes)
    vals = khat(m, m, rule.nodes, sigma, s)
    return float(rule.integrate(vals))


# ---------------------------------------------------------------------------
# band-localized bound probes
# ---------------------------------------------------------------------------

def _band_integral(m, nu, probe, h, region, nodes=10, refine=1):
    """integral over t in ``region`` of |integral K_hat(t, sigma, s) h(sigma) dsigma|.

    region: "offband" = (0, a-2b) u (a+2b, T); "tail" = (a+b, T);
    "full" = (0, T).  T is the decay cutoff of the kernel in t.
    """
    a, b, s = probe
    srule = h.rule()
    if refine > 1:
        srule = srule.refined(refine)
    hvals = h(srule.nodes)

    hi = max(_t_cutoff(m, s, (a + 2 * b) * s), 3 * (a + 2 * b))
    pieces = []
    if region == "offband":
        if a - 2 * b > 0:
            pieces.append(np.linspace(0.0, a - 2 * b, 7))
        pieces.append(geometric_breakpoints(a + 2 * b, hi, 12))
    elif region == "tail":
        pieces.append(geometric_breakpoints(a + b, hi, 12))
    elif region == "full":
        pieces.append(np.linspace(0.0, max(a - b, 1e-3 * a), 5))
        pieces.append(np.linspace(max(a - b, 1e-3 * a), a + b, 7)[1:])
        pieces.append(geometric_breakpoints(a + b, hi, 12)[1:])
    else:
        raise DomainError(f"unknown region {region!r}")

    total = 0.0
    for bp in pieces:
        trule = PanelRule(np.unique(bp), nodes * refine if refine > 1 else nodes)
        # F(t) = integral K_hat h dsigma, vectorized over the t nodes
        Kmat = khat(m, nu, trule.nodes[:, None], srule.nodes[None, :], s)
        F = Kmat @ (srule.weights * hvals)
        total += trule.integrate(np.abs(F))
    return float(total)


def check_offband_bound(m, probe, h: BumpFamily, refine=1):
    """Measured off-band integral and its exponential envelope variable.

    Returns dict with measured, x = (as)^(m/2) (bs), and the probe.
    The envelope is P1 = exp(-c x); the constant is fitted at family level.
    """
    if h.shape != "plain_bump":
        raise DomainError("off-band check uses the plain (unit-mass) bump")
    a, b, s = probe
    if b / a > 0.5:
        raise DomainError("off-band probes need b/a <= 1/2")
    measured = _band_integral(m, m, probe, h, "offband", refine=refine)
    x = (a * s) ** (0.5 * m) * (b * s)
    return {"m": m, "a": a, "b": b, "s": s, "measured": measured, "x": x}


def _p2(m, A, B):
    return B * A ** (0.5 * m) + B ** 2 * A ** m + B ** 3 * A ** (1.5 * m)


def _p5(m, A, B):
    return A if A <= 1.0 else B * A ** (0.5 * m)


def _p6(m, A, B):
    return _p5(m, A, B) + B * A ** (0.5 * m) + B ** 2 * A ** m


def check_meanzero_bound(m, probe, h: BumpFamily, refine=1):
    """Full-line integral for a mean-zero bump against P2(as, bs)."""
    if h.shape != "mean_zero_bump":
        raise DomainError("cancellation check requires the mean-zero bump")
    a, b, s = probe
    measured = _band_integral(m, m, probe, h, "full", refine=refine)
    bound = _p2(m, a * s, b * s)
    return {"m": m, "a": a, "b": b, "s": s, "measured": measured,
            "bound": bound, "ratio": measured / bound}


def check_weighted_bounds(m, nu, probe, h: BumpFamily, refine=1):
    """Tail vs P5 and full-line vs P6 for the nu-weighted kernel, mean-zero bump."""
    if not 0 < nu < m:
        raise DomainError("weighted bounds probe the range 0 < nu < m")
    if h.shape != "mean_zero_bump":
        raise DomainError("weighted checks use the mean-zero bump")
    a, b, s = probe
    A, B = a * s, b * s
    tail = _band_integral(m, nu, probe, h, "tail", refine=refine)
    full = _band_integral(m, nu, probe, h, "full", refine=refine)
    return {"m": m, "nu": nu, "a": a, "b": b, "s": s,
            "tail": tail, "p5": _p5(m, A, B), "ratio5": tail / _p5(m, A, B),
            "full": full, "p6": _p6(m, A, B), "ratio6": full / _p6(m, A, B)}


def pointwise_domination_samples(m, nu, rng, n=200):
    """Max over random (t, sigma, s) of K_hat_nu - (K_hat_1 + K_hat_2).

    K_hat_1 carries sigma^m, K_hat_2 carries t^m; the branch inequality
    t^(m-nu) sigma^nu <= t^m + sigma^m makes the difference <= 0.
    """
    t = rng.uniform(0.05, 4.0, n)
    sig = rng.uniform(0.05, 4.0, n)
    s = rng.uniform(0.1, 3.0, n)
    T = duhamel_kernel_T(m, t, sig, s)
    kv = s ** (m + 2) * t ** (m - nu) * sig ** nu * T
    k1 = s ** (m + 2) * sig ** float(m) * T
    k2 = s ** (m + 2) * t ** float(m) * T
    return float(np.max(kv - (k1 + k2)))


# ---------------------------------------------------------------------------
# constant fitting and the report
# ---------------------------------------------------------------------------

def _upper_hull(xs, ys):
    """Upper convex hull of (x, y) points, as index arrays sorted by x."""
    order = np.argsort(xs)
    hx, hy = [], []
    for i in order:
        x, y = xs[i], ys[i]
        while len(hx) >= 2:
            # drop middle points lying below the chord (keep hull concave)
            s1 = (hy[-1] - hy[-2]) / (hx[-1] - hx[-2] + 1e-300)
            s2 = (y - hy[-1]) / (x - hx[-1] + 1e-300)
            if s2 >= s1:
                hx.pop(); hy.pop()
            else:
                break
        if hx and x <= hx[-1] + 1e-300:
            hy[-1] = max(hy[-1], y)
            continue
        hx.append(x); hy.append(y)
    return np.array(hx), np.array(hy)


_X_MIN = 2.0  # decay variable below which only the prefactor is asserted
_RATE_DERATE = 0.65  # asserted envelope rate as a fraction of the calibrated one


def fit_worst_rate_envelope(xs, measured, floor=1e-250, x_min=_X_MIN,
                            pref_safety=1.4):
    """(C, C') with measured <= C' exp(-C x) across the calibration probes.

    C' is a safety multiple of the largest measured value; C is the
    minimum observed per-probe rate (log C' - log measured)/x over
    probes with x >= x_min.  Exact-zero probes (underflowed integrals)
    satisfy any envelope and are skipped.
    """
    xs = np.asarray(xs, dtype=float)
    ms = np.asarray(measured, dtype=float)
    if not np.any(ms > floor):
        raise AccuracyError("all calibration probes underflowed")
    log_pref = math.log(pref_safety * float(np.max(ms)))
    keep = (ms > floor) & (xs >= x_min)
    if np.sum(keep) < 5:
        raise AccuracyError("too few large-x calibration probes for the rate fit")
    rates = (log_pref - np.log(ms[keep])) / xs[keep]
    rate = float(np.min(rates))
    if rate <= 0:
        raise AccuracyError("no uniform exponential decay rate on calibration",
                            worst_rate=rate)
    return rate, math.exp(log_pref)


def fit_exponential_envelope(xs, measured, floor=1e-250, x_tail=None,
                             rate_margin=0.85):
    """Envelope measured <= C' exp(-c x) from the upper convex hull.

    The measured integrals at equal x mix very different (a, b, s)
    probes, so a least-squares rate extrapolates badly (errors amplify
    like e^(rate_err * x)).  Instead the asserted rate is rate_margin
    times the shallowest decaying hull-segment slope beyond x_tail (the
    slowest decay actually observed), and the prefactor is raised until
    every calibration point sits under the envelope.  A subexponential
    family would drive the hull tail slope, and hence the reported rate,
    to zero -- which the decay assertions catch.
    """
    xs = np.asarray(xs, dtype=float)
    ms = np.asarray(measured, dtype=float)
    keep = ms > floor
    if np.sum(keep) < 5:
        raise AccuracyError("too few usable calibration probes for the exponential fit")
    x, y = xs[keep], np.log(ms[keep])
    hx, hy = _upper_hull(x, y)
    slopes = np.diff(hy) / np.diff(hx)
    if x_tail is None:
        x_tail = 0.5 * hx[-1]  # top half of the usable decay-variable range
    tail = slopes[(hx[1:] >= x_tail) & (slopes < 0)]
    if tail.size == 0:
        raise AccuracyError("no decaying tail found on the calibration hull",
                            hull_x=hx.tolist())
    rate = rate_margin * float(-np.max(tail))  # shallowest decaying slope
    log_pref = float(np.max(y + rate * x))
    return rate, float(np.exp(log_pref))


def fit_constant_envelope(measured, bounds):
    """Smallest C with measured <= C * bound across the calibration probes."""
    measured = np.asarray(measured, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    if np.any(bounds <= 0):
        raise DomainError("envelope values must be positive")
    return float(np.max(measured / bounds))


@dataclass
class BoundCheck:
    """One bound family: fitted constants plus validation outcome."""

    name: str
    fitted: dict
    calibration: list
    validation: list
    max_ratio: float
    violations: int

    @property
    def passed(self):
        return self.violations == 0


@dataclass
class KernelProbeReport:
    checks: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def add(self, check):
        self.checks.append(check)

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def summary_lines(self):
        out = []
        for c in self.checks:
            fitted = ", ".join(f"{k}={v:.6g}" for k, v in c.fitted.items())
            out.append(
                f"{c.name}: fitted [{fitted}] max_validation_ratio={c.max_ratio:.6g} "
                f"violations={c.violations} ({'PASS' if c.passed else 'FAIL'})")
        return out


def _probe_products(rng, n, a_range=(0.4, 4.0), ratio_range=(0.04, 0.45),
                    s_range=(0.3, 3.0)):
    a = np.exp(rng.uniform(np.log(a_range[0]), np.log(a_range[1]), n))
    b = a * rng.uniform(*ratio_range, n)
    s = np.exp(rng.uniform(np.log(s_range[0]), np.log(s_range[1]), n))
    return list(zip(a, b, s))


_RATIO_BUCKETS = ((0.02, 0.05), (0.05, 0.12), (0.12, 0.25), (0.25, 0.45))


def _offband_x_window(m, as_range=(0.3, 9.0), x_cap=30.0):
    """Decay-variable window reachable by the probe geometry for this m."""
    x_max = 0.45 * as_range[1] ** (0.5 * (m + 2))
    return 0.05, min(x_cap, x_max)


def _offband_probes(rng, n, m, as_range=(0.3, 9.0), s_range=(0.3, 3.0),
                    deep_floor=None):
    """Probes stratified by the band ratio rho = b/a and by the decay
    variable x = (as)^(m/2) (bs) = rho (as)^((m+2)/2).

    At fixed x the integral depends strongly on rho (the effective decay
    exponent shrinks as rho -> 1/2 through the closing left band), so
    the probe grid must cover both coordinates; half of every bucket's
    draws land in the top 30 percent (log scale) of its reachable
    x-range so the worst-rate fit always sees the deep-decay regime.
    The integral depends on (as, bs) only, so a and s split the drawn
    product freely.
    """
    cap = _offband_x_window(m, as_range)[1]
    per = max(6, n // len(_RATIO_BUCKETS))
    out = []
    for lo, hi in _RATIO_BUCKETS:
        got, guard = 0, 0
        while got < per and guard < 500 * per:
            guard += 1
            rho = math.exp(rng.uniform(math.log(lo), math.log(hi)))
            x_hi = min(cap, rho * as_range[1] ** (0.5 * (m + 2)))
            x_lo = max(0.05, rho * as_range[0] ** (0.5 * (m + 2)))
            if x_hi <= x_lo * 1.01:
                continue
            if got % 2 == 0:
                split = math.exp(0.3 * math.log(x_lo) + 0.7 * math.log(x_hi))
                if deep_floor is not None and deep_floor * 1.05 < x_hi:
                    split = max(split, deep_floor * 1.05)
                x_lo = min(split, 0.99 * x_hi)
            x = math.exp(rng.uniform(math.log(x_lo), math.log(x_hi)))
            a_s = (x / rho) ** (2.0 / (m + 2))
            s = math.exp(rng.uniform(math.log(s_range[0]), math.log(s_range[1])))
            a = a_s / s
            out.append((a, rho * a, s))
            got += 1
        if got < per:
            raise AccuracyError("could not draw enough admissible off-band probes")
    return out


def _ordered_parallel(fn, items, threads):
    """Map preserving order; thread pool only when threads > 1."""
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def run_kernel_verification(seed=0, n_calibration=90, n_validation=120,
                            m_values=(0, 1, 3), weighted=((1, 0.5), (3, 1.0)),
                            refine=1, slack=1.5, threads=1):
    """Full verification sweep; returns a KernelProbeReport.

    The frozen constant asserted on the validation grid is the
    calibration envelope times ``slack`` (declared up front as part of
    the protocol; the measured quantities depend on (as, bs) alone, so
    the slack absorbs finite-sample spread of the calibration max, while
    quadrature-doubling stability guards against quadrature artifacts).
    Probes are independent; ``threads`` parallelizes their evaluation
    with a deterministic (submission-order) reduction.
    """
    rng = np.random.default_rng(seed)
    report = KernelProbeReport()

    for m in m_values:
        # --- off-band exponential envelope (plain bump) ---------------------
        def _off(probe, m=m):
            a, b, s = probe
            return check_offband_bound(m, probe, BumpFamily("plain_bump", a, b),
                                       refine=refine)

        x_min_m = max(0.8, 0.35 * _offband_x_window(m)[1])
        cal = _ordered_parallel(
            _off, _offband_probes(rng, n_calibration, m, deep_floor=x_min_m), threads)
        val = _ordered_parallel(
            _off, _offband_probes(rng, n_validation, m, deep_floor=x_min_m), threads)
        # Uniform worst-rate envelope: C' covers all measured values, C is
        # the smallest observed decay rate (log C' - log measured)/x on the
        # calibration grid.  Validation asserts the envelope with the rate
        # derated to 0.8 C (margins live in rate space, so they do not
        # amplify exponentially with x; subexponential decay would push
        # observed rates below 0.8 C at large x and fail).
        x_min = x_min_m
        rate, pref = fit_worst_rate_envelope([r["x"] for r in cal],
                                             [r["measured"] for r in cal],
                                             x_min=x_min)
        ratios = []
        for r in val:
            r["bound"] = pref * math.exp(-_RATE_DERATE * rate * r["x"]) \
                if r["x"] >= x_min else pref
            r["ratio"] = r["measured"] / (r["bound"] + 1e-300)
            r["family"] = f"P1[m={m}]"
            ratios.append(r["ratio"])
        report.rows += val
        viol = sum(q > slack for q in ratios)
        report.add(BoundCheck(f"P1[m={m}]", {"rate": rate, "prefactor": pref},
                              cal, val, float(np.max(ratios)), viol))

        # --- mean-zero cancellation envelope P2 ------------------------------
        def _mz(probe, m=m):
            a, b, s = probe
            return check_meanzero_bound(m, probe,
                                        BumpFamily("mean_zero_bump", a, b),
                                        refine=refine)

        cal = _ordered_parallel(_mz, _probe_products(rng, n_calibration), threads)
        val = _ordered_parallel(_mz, _probe_products(rng, n_validation), threads)
        C2 = fit_constant_envelope([r["measured"] for r in cal],
                                   [r["bound"] for r in cal])
        ratios = [r["measured"] / (C2 * r["bound"]) for r in val]
        for r, q in zip(val, ratios):
            r["family"] = f"P2[m={m}]"
            r["ratio"] = q
        report.rows += val
        viol = sum(q > slack for q in ratios)
        report.add(BoundCheck(f"P2[m={m}]", {"C": C2}, cal, val,
                              float(np.max(ratios)), viol))

    for m, nu in weighted:
        def _wt(probe, m=m, nu=nu):
            a, b, s = probe
            return check_weighted_bounds(m, nu, probe,
                                         BumpFamily("mean_zero_bump", a, b),
                                         refine=refine)

        cal = _ordered_parallel(_wt, _probe_products(rng, n_calibration), threads)
        val = _ordered_parallel(_wt, _probe_products(rng, n_validation), threads)
        C5 = fit_constant_envelope([r["tail"] for r in cal], [r["p5"] for r in cal])
        C6 = fit_constant_envelope([r["full"] for r in cal], [r["p6"] for r in cal])
        r5 = [r["tail"] / (C5 * r["p5"]) for r in val]
        r6 = [r["full"] / (C6 * r["p6"]) for r in val]
        for r, q5, q6 in zip(val, r5, r6):
            r["family"] = f"P5P6[m={m},nu={nu}]"
            r["ratio"] = max(q5, q6)
        report.rows += val
        viol = sum(q > slack for q in r5) + sum(q > slack for q in r6)
        report.add(BoundCheck(f"P5P6[m={m},nu={nu}]", {"C5": C5, "C6": C6},
                              cal, val, float(max(np.max(r5), np.max(r6))), viol))
    return report
