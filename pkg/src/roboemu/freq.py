"""Frequency-domain analysis of the force-matching loop.

Scalar transfer functions per eigenvalue ``lambda_q`` of the inertia ratio:

* admittance ``Z = s^2 / (s^2 + G_v s + G_p)``
* actuator lag ``H = 1 / (1 + s / omega_a)``
* loop gain ``L' = H / (Z - Z H) = omega_a (s^2 + G_v s + G_p) / s^3``
* transmissivity ``T = L' / (lambda_q + L')``, the map from multiplier to
  contact force.

The closed loop is stable iff ``lambda_q / omega_a s^3 + s^2 + G_v s + G_p``
is Hurwitz, i.e. ``lambda_q < omega_a G_v / G_p = 2 omega_a / omega_p``.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .control import ControllerGains

ROOT_TOL = 1e-9
MARGINAL_BAND = 1e-6


def _trim(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    nz = np.flatnonzero(c)
    return c[nz[0] :] if nz.size else np.zeros(1)


def _factor(r: complex) -> np.ndarray:
    if abs(r.imag) > 0:
        return np.array([1.0, -2.0 * r.real, abs(r) ** 2])
    return np.array([1.0, -r.real])


def _divides(p: np.ndarray, f: np.ndarray, tol: float):
    q, rem = np.polydiv(p, f)
    return q if np.max(np.abs(rem), initial=0.0) <= tol * np.max(np.abs(p)) else None


def _cancel(num: np.ndarray, den: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Divide out common factors of num and den.

    Candidates are denominator roots lying near a numerator root (loosely,
    since repeated roots are computed inaccurately); a candidate factor is
    accepted only if it divides both polynomials with relative remainder
    below ``tol``.
    """
    changed = True
    while changed and len(num) > 1 and len(den) > 1:
        changed = False
        zr = np.roots(num)
        for r in np.roots(den):
            if r.imag < 0:
                continue
            if np.min(np.abs(zr - r)) > 1e-4 * max(1.0, abs(r)):
                continue
            f = _factor(complex(r))
            qn, qd = _divides(num, f, tol), _divides(den, f, tol)
            if qn is not None and qd is not None:
                num, den, changed = _chop(qn), _chop(qd), True
                break
    return num, den


def _chop(p: np.ndarray, rel: float = 1e-12) -> np.ndarray:
    """Zero division noise left in coefficients that should vanish."""
    p = np.where(np.abs(p) <= rel * np.max(np.abs(p)), 0.0, p)
    return _trim(p)


@dataclass(frozen=True)
class RationalTransfer:
    """``num(s) / den(s)`` with real coefficients, highest power first.

    Exactly (within ``ROOT_TOL``) cancelling numerator/denominator roots
    are removed on construction and the denominator is made monic.
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num, den = _trim(self.num), _trim(self.den)
        if not np.any(den):
            raise ZeroDivisionError("denominator polynomial is zero")
        if np.any(num):
            num, den = _cancel(num, den, ROOT_TOL)
        else:
            num, den = np.zeros(1), np.ones(1)
        lead = den[0]
        object.__setattr__(self, "num", num / lead)
        object.__setattr__(self, "den", den / lead)

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def at(self, omega):
        """Frequency response ``G(j omega)``."""
        return self(1j * np.asarray(omega, dtype=float))

    def __mul__(self, other: "RationalTransfer | float") -> "RationalTransfer":
        other = _lift(other)
        return RationalTransfer(np.polymul(self.num, other.num), np.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other: "RationalTransfer | float") -> "RationalTransfer":
        other = _lift(other)
        return RationalTransfer(np.polymul(self.num, other.den), np.polymul(self.den, other.num))

    def __rtruediv__(self, other: float) -> "RationalTransfer":
        return _lift(other) / self

    def __add__(self, other: "RationalTransfer | float") -> "RationalTransfer":
        other = _lift(other)
        num = np.polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return RationalTransfer(num, np.polymul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self) -> "RationalTransfer":
        return RationalTransfer(-self.num, self.den)

    def __sub__(self, other: "RationalTransfer | float") -> "RationalTransfer":
        return self + (-_lift(other))

    def __rsub__(self, other: float) -> "RationalTransfer":
        return _lift(other) - self

    @property
    def relative_degree(self) -> int:
        return (len(self.den) - 1) - (len(self.num) - 1)

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num)

    def is_hurwitz(self) -> bool:
        p = self.poles()
        return bool(np.all(p.real < 0)) if p.size else True

    def dc_gain(self) -> float:
        return float(np.real(self(0.0)))

    def hinf_norm(self, lo: float = 1e-4, hi: float = 1e5, samples: int = 2000) -> tuple[float, float]:
        """``(sup |G(j omega)|, arg sup)`` by sampling then golden-section refinement.

        The high-frequency limit is included; ``inf`` if a pole sits on or
        right of the imaginary axis.
        """
        if not self.is_hurwitz():
            return float("inf"), float("nan")
        w = np.logspace(np.log10(lo), np.log10(hi), samples)
        mag = np.abs(self.at(w))
        i = int(np.argmax(mag))
        best, arg = float(mag[i]), float(w[i])
        if 0 < i < samples - 1 and mag[i] > max(mag[i - 1], mag[i + 1]):
            x = np.log10(w)
            try:
                res = minimize_scalar(
                    lambda lw: -abs(self.at(10.0**lw)), bracket=(x[i - 1], x[i], x[i + 1]), method="golden"
                )
            except ValueError:
                res = None  # plateau flat to rounding: the sampled peak stands
            if res is not None and -res.fun > best:
                best, arg = float(-res.fun), float(10.0**res.x)
        if self.relative_degree == 0:
            limit = abs(self.num[0] / self.den[0])
            if limit > best:
                best, arg = float(limit), float("inf")
        return best, arg


def _lift(x) -> RationalTransfer:
    return x if isinstance(x, RationalTransfer) else RationalTransfer([float(x)], [1.0])


S = RationalTransfer([1.0, 0.0], [1.0])


def _gains(gains) -> tuple[float, float]:
    if isinstance(gains, ControllerGains):
        return float(gains.k_p), float(gains.k_v)
    k_p, k_v = gains
    return float(k_p), float(k_v)


def error_polynomial(gains) -> np.ndarray:
    k_p, k_v = _gains(gains)
    return np.array([1.0, k_v, k_p])


def admittance(gains) -> RationalTransfer:
    """``Z(s) = s^2 / (s^2 + G_v s + G_p)``; rejects a non-Hurwitz denominator."""
    den = error_polynomial(gains)
    if not np.all(np.roots(den).real < 0):
        raise ValueError(f"admittance denominator {den.tolist()} is not Hurwitz")
    return RationalTransfer([1.0, 0.0, 0.0], den)


def admittance_peak(gains) -> float:
    """``||Z||_inf``; warns when ``G_v^2 < 2 G_p`` makes it exceed one."""
    k_p, k_v = _gains(gains)
    peak = admittance(gains).hinf_norm()[0]
    if k_v**2 < 2.0 * k_p:
        warnings.warn(
            f"G_v^2 < 2 G_p ({k_v**2:g} < {2 * k_p:g}): admittance peaks at {peak:.4g} > 1",
            RuntimeWarning,
            stacklevel=2,
        )
    return peak


def actuator_lag(omega_a: float) -> RationalTransfer:
    if not omega_a > 0:
        raise ValueError(f"omega_a must be positive, got {omega_a}")
    return RationalTransfer([1.0], [1.0 / omega_a, 1.0])


def loop_gain_prime(omega_a: float, gains) -> RationalTransfer:
    """``L' = H / (Z - Z H)``.

    ``H / (1 - H) = omega_a / s`` for the first-order lag, so this is
    ``omega_a (s^2 + G_v s + G_p) / s^3`` exactly; building it that way
    avoids the cancellation residue of the generic rational arithmetic.
    """
    admittance(gains)
    actuator_lag(omega_a)
    return RationalTransfer(omega_a * error_polynomial(gains), [1.0, 0.0, 0.0, 0.0])


def loop_gain(omega_a: float, gains, lam_q: float) -> RationalTransfer:
    """Component loop gain ``L' / lambda_q`` for one eigenvalue of ``Q``."""
    if not lam_q > 0:
        raise ValueError(f"inertia ratio not positive-definite: eigenvalue {lam_q}")
    return loop_gain_prime(omega_a, gains) / lam_q


def transmissivity(lam_q: float, omega_a: float, gains) -> RationalTransfer:
    """``T = L' / (lambda_q + L')`` from multiplier to realized contact force."""
    if not lam_q > 0:
        raise ValueError(f"inertia ratio not positive-definite: eigenvalue {lam_q}")
    num = omega_a * error_polynomial(gains)
    return RationalTransfer(num, np.array([lam_q, 0.0, 0.0, 0.0]) + np.concatenate(([0.0], num)))


def characteristic(lam_q: float, omega_a: float, gains) -> np.ndarray:
    """``lambda_q / omega_a s^3 + s^2 + G_v s + G_p``."""
    k_p, k_v = _gains(gains)
    return np.array([lam_q / omega_a, 1.0, k_v, k_p])


def routh_column(lam_q: float, omega_a: float, gains) -> np.ndarray:
    """First Routh column of the cubic characteristic polynomial."""
    k_p, k_v = _gains(gains)
    return np.array([lam_q / omega_a, 1.0, k_v - lam_q * k_p / omega_a, k_p])


def stability_bound(omega_a: float, gains) -> float:
    """``2 omega_a / omega_p = omega_a G_v / G_p``."""
    k_p, k_v = _gains(gains)
    return omega_a * k_v / k_p


@dataclass(frozen=True)
class EigenVerdict:
    lam: float
    verdict: str
    margin: float
    routh: np.ndarray
    routh_changes: int
    roots: np.ndarray
    root_verdict: str
    reason: str = ""


@dataclass(frozen=True)
class StabilityVerdict:
    """Per-eigenvalue verdicts against the binding bound ``2 omega_a / omega_p``."""

    bound: float
    omega_a: float
    omega_p: float
    entries: tuple[EigenVerdict, ...] = field(default_factory=tuple)

    @property
    def verdict(self) -> str:
        kinds = {e.verdict for e in self.entries}
        for kind in ("unstable", "marginal"):
            if kind in kinds:
                return kind
        return "stable"

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    @property
    def margin(self) -> float:
        """``lmax(Q) - bound``; negative when stable."""
        return max(e.margin for e in self.entries)


def _root_verdict(roots: np.ndarray, band: float) -> str:
    scale = max(1.0, float(np.max(np.abs(roots))))
    re = float(np.max(roots.real))
    if abs(re) <= band * scale:
        return "marginal"
    return "stable" if re < 0 else "unstable"


def stability_gate(q_eigs, omega_a: float, gains, band: float = MARGINAL_BAND) -> StabilityVerdict:
    """Closed-form verdict per eigenvalue, with Routh and root cross-checks.

    ``|margin| < band * bound`` is reported as marginal. Non-positive
    eigenvalues are unstable with the reason "Q not positive-definite".
    """
    k_p, k_v = _gains(gains)
    bound = stability_bound(omega_a, gains)
    entries = []
    for lam in np.atleast_1d(np.asarray(q_eigs, dtype=float)):
        lam = float(lam)
        if not lam > 0:
            nan = np.full(4, np.nan)
            entries.append(EigenVerdict(lam, "unstable", float("inf"), nan, -1, np.full(3, np.nan),
                                        "unstable", "Q not positive-definite"))
            continue
        margin = lam - bound
        if abs(margin) < band * bound:
            verdict = "marginal"
        else:
            verdict = "stable" if margin < 0 else "unstable"
        col = routh_column(lam, omega_a, gains)
        changes = int(np.sum(np.sign(col[:-1]) != np.sign(col[1:])))
        roots = np.roots(characteristic(lam, omega_a, gains))
        entries.append(EigenVerdict(lam, verdict, margin, col, changes, roots, _root_verdict(roots, band)))
    return StabilityVerdict(bound, float(omega_a), 2.0 * k_p / k_v, tuple(entries))


BODE_GRID = np.logspace(-2, 4, 400)


@dataclass(frozen=True)
class BodeCurve:
    lam: float
    omega: np.ndarray
    magnitude: np.ndarray
    stable: bool
    peak: float


def bode_magnitude(T: RationalTransfer, omega=None) -> np.ndarray:
    omega = BODE_GRID if omega is None else np.asarray(omega, dtype=float)
    return np.abs(T.at(omega))


def transmissivity_curves(lams, omega_a: float, gains, omega=None) -> list[BodeCurve]:
    """``|T(j omega)|`` per eigenvalue, flagged when the loop is not stable."""
    omega = BODE_GRID if omega is None else np.asarray(omega, dtype=float)
    gate = stability_gate(lams, omega_a, gains)
    out = []
    for entry in gate.entries:
        T = transmissivity(entry.lam, omega_a, gains)
        mag = bode_magnitude(T, omega)
        stable = entry.verdict == "stable"
        peak = T.hinf_norm()[0] if stable else float("inf")
        out.append(BodeCurve(entry.lam, omega, mag, stable, peak))
    return out


@dataclass(frozen=True)
class SensitivityReport:
    scheme: str
    omega: np.ndarray
    gain: np.ndarray
    sigma_max: float
    bound: float
    dc_gain: float


def disturbance_sensitivity(Q, gains, scheme: str = "A", omega=None, Mc_r=None) -> SensitivityReport:
    """Worst-axis gain from disturbance ``d`` to the scheme's error.

    Scheme A: ``|e_f / d| = |Z(j omega)| smax(Q)``.
    Scheme B: ``|Phi / d| = smax(Mc_r^-1) / |(j omega)^2 + G_v j omega + G_p|``;
    ``Mc_r`` is required.
    """
    omega = BODE_GRID if omega is None else np.asarray(omega, dtype=float)
    if scheme == "A":
        sigma = float(np.linalg.svd(np.atleast_2d(np.asarray(Q, dtype=float)), compute_uv=False)[0])
        Z = admittance(gains)
        return SensitivityReport("A", omega, np.abs(Z.at(omega)) * sigma, sigma, Z.hinf_norm()[0] * sigma, 0.0)
    if scheme == "B":
        if Mc_r is None:
            raise ValueError("scheme B sensitivity needs the emulator Cartesian inertia Mc_r")
        Minv = np.linalg.inv(np.atleast_2d(np.asarray(Mc_r, dtype=float)))
        sigma = float(np.linalg.svd(Minv, compute_uv=False)[0])
        E = RationalTransfer([1.0], error_polynomial(gains))
        return SensitivityReport("B", omega, np.abs(E.at(omega)) * sigma, sigma, E.hinf_norm()[0] * sigma,
                                 E.dc_gain() * sigma)
    raise ValueError(f"unknown scheme {scheme!r}")


def format_bode_csv(
    curves: list[BodeCurve], gate: StabilityVerdict, header: dict | None = None, extra: dict | None = None
) -> str:
    """Plot-ready CSV: ``omega``, one ``|T|`` column per eigenvalue, then ``extra`` columns.

    Verdict metadata goes in ``#`` comment lines above the header row;
    curves of non-stable eigenvalues are flagged there.
    """
    extra = extra or {}
    buf = io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}: {value}\n")
    buf.write(f"# bound 2*omega_a/omega_p: {gate.bound:.12g}\n")
    for e in gate.entries:
        buf.write(f"# lambda_q={e.lam:.12g} verdict={e.verdict} margin={e.margin:.12g}"
                  f" routh_changes={e.routh_changes} root_verdict={e.root_verdict}"
                  f"{'' if e.verdict == 'stable' else ' FLAGGED'}\n")
    buf.write(",".join(["omega"] + [f"T_q{c.lam:g}" for c in curves] + list(extra)) + "\n")
    data = np.column_stack([curves[0].omega] + [c.magnitude for c in curves] + list(extra.values()))
    for row in data:
        buf.write(",".join(f"{v:.12g}" for v in row) + "\n")
    return buf.getvalue()
