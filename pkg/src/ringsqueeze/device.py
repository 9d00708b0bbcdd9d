"""Physical description of the coupled ring / waveguide / phantom-channel system.

The device is a racetrack resonator of effective length ``ring_length``,
side coupled to a bus waveguide along ``[0, coupler_length]``, with
scattering loss discretised into point-coupled phantom channels.  Ring
phantom channels sit at equally spaced positions ``n * L_r / n_ring``;
every ring channel whose position falls strictly inside the coupling
region gets a partner channel tapping the waveguide at the same position,
with the same self-coupling, so coupler-region loss is identical for ring
and waveguide.

Calibration works backwards from experiment-level targets: a finesse and
an escape efficiency are converted into a round-trip amplitude factor
``rho = sigma_bar * xi``, the single-pass survival ``xi`` and the coupler
strength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .units import C_LIGHT

_TWO_PI = 2.0 * math.pi


class ConfigurationError(ValueError):
    """Raised when device or run parameters are inconsistent."""


class InfeasibleTargetError(ConfigurationError):
    """Raised when calibration targets admit no physical solution."""


class UnphysicalDeviceError(ConfigurationError):
    """Raised when a device would have round-trip gain >= 1."""


@dataclass(frozen=True)
class ResonanceSpec:
    """Linear description of one resonance window.

    Parameters
    ----------
    label : str
        One of ``"S"``, ``"P"``, ``"I"``.
    omega : float
        Center angular frequency [rad/ps].
    k_wg : float
        Waveguide reference wavevector [rad/um].
    k_ring : float
        Ring reference wavevector [rad/um].
    v : float
        Waveguide group velocity [um/ps].
    u : float
        Ring group velocity [um/ps].
    """

    label: str
    omega: float
    k_wg: float
    k_ring: float
    v: float
    u: float

    def __post_init__(self) -> None:
        if self.omega <= 0 or self.v <= 0 or self.u <= 0:
            raise ConfigurationError(
                f"resonance {self.label}: omega, v, u must be positive"
            )

    @property
    def delta_beta(self) -> float:
        """Reference wavevector mismatch k_wg - k_ring [rad/um]."""
        return self.k_wg - self.k_ring


@dataclass(frozen=True)
class PhantomLayout:
    """Placement and strength of the phantom loss channels.

    ``sigma_ring[n]`` is the self-coupling of the n-th ring channel; its
    cross-coupling is ``sqrt(1 - sigma**2)`` so the splice is exactly
    unitary.  Waveguide channels mirror the ring channels inside the
    coupling region one for one.
    """

    ring_positions: np.ndarray  # [um], shape (n_ring,)
    sigma_ring: np.ndarray      # shape (n_ring,)
    wg_indices: np.ndarray      # indices into ring arrays of paired channels

    def __post_init__(self) -> None:
        if np.any(self.sigma_ring <= 0.0) or np.any(self.sigma_ring > 1.0):
            raise ConfigurationError("phantom self-couplings must lie in (0, 1]")

    @property
    def n_ring(self) -> int:
        return len(self.ring_positions)

    @property
    def n_wg(self) -> int:
        return len(self.wg_indices)

    @property
    def n_total(self) -> int:
        """Total phantom channel count N_L."""
        return self.n_ring + self.n_wg

    @property
    def wg_positions(self) -> np.ndarray:
        return self.ring_positions[self.wg_indices]

    @property
    def sigma_wg(self) -> np.ndarray:
        return self.sigma_ring[self.wg_indices]

    @property
    def kappa_ring(self) -> np.ndarray:
        return np.sqrt(1.0 - self.sigma_ring**2)

    @property
    def kappa_wg(self) -> np.ndarray:
        return np.sqrt(1.0 - self.sigma_wg**2)

    @property
    def xi(self) -> float:
        """Single-pass amplitude survival around the ring."""
        return float(np.prod(self.sigma_ring))


@dataclass(frozen=True)
class ResonanceWindow:
    """Uniform wavevector grid covering one resonance."""

    label: str
    k: np.ndarray          # [rad/um], odd length, symmetric about k_center
    k_center: float

    @property
    def n_k(self) -> int:
        return len(self.k)

    @property
    def dk_bin(self) -> float:
        return float(self.k[1] - self.k[0])

    @property
    def detuning(self) -> np.ndarray:
        """k - k_center for every bin."""
        return self.k - self.k_center

    @property
    def center_index(self) -> int:
        return (len(self.k) - 1) // 2


@dataclass(frozen=True)
class DeviceSpec:
    """Complete calibrated device.

    All quantities are in the package unit system (um, ps, pJ, mW).
    ``gamma_nl`` is the nonlinear parameter per mW per um; constructors
    accept the customary per mW per m value and convert.
    """

    ring_length: float          # L_r [um]
    coupler_length: float       # L_c [um]
    omega_c: float              # coupling rate [rad/ps]
    branch: int                 # coupler branch index b
    resonances: tuple[ResonanceSpec, ...]
    gamma_nl: float             # [(mW um)^-1]
    phantom: PhantomLayout
    # Calibration record (for reporting; derivable from the rest)
    sigma_bar_design: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if not 0.0 < self.coupler_length <= self.ring_length:
            raise ConfigurationError("need 0 < L_c <= L_r")
        if self.branch < 0:
            raise ConfigurationError("coupler branch index must be >= 0")
        labels = [r.label for r in self.resonances]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("duplicate resonance labels")
        for res in self.resonances:
            m = res.k_ring * self.ring_length / _TWO_PI
            if abs(m - round(m)) > 1.0e-9:
                raise ConfigurationError(
                    f"resonance {res.label}: k_ring*L_r must be a multiple of 2*pi "
                    f"(omega must sit on an isolated-ring resonance peak)"
                )

    def resonance(self, label: str) -> ResonanceSpec:
        for res in self.resonances:
            if res.label == label:
                return res
        raise KeyError(f"no resonance labelled {label!r}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.resonances)

    def alpha0(self, label: str) -> float:
        """Coupler envelope wavenumber alpha_{J,0} = omega_c/sqrt(v u) [rad/um]."""
        res = self.resonance(label)
        return self.omega_c / math.sqrt(res.v * res.u)

    def round_trip_time(self, label: str) -> float:
        """Effective round-trip time L_tilde / v [ps]."""
        res = self.resonance(label)
        _, l_tilde = map_path(self, label, self.ring_length)
        return l_tilde / res.v


def map_path(spec: DeviceSpec, label: str, z: float) -> tuple[float, float]:
    """Effective path length l_J(z) and effective resonator length L_tilde.

    The envelope of a wave launched in the waveguide accumulates detuning
    phase along l_J(z) rather than z itself when the ring and waveguide
    group velocities differ.

    Parameters
    ----------
    spec : DeviceSpec
    label : str
        Resonance label.
    z : float
        Position along the straightened ring, 0 <= z <= L_r [um].

    Returns
    -------
    l_z : float
        Effective path length at z [um].
    l_tilde : float
        Effective resonator length l_J(L_r) [um].
    """
    if not 0.0 <= z <= spec.ring_length:
        raise ConfigurationError(f"z={z} outside [0, L_r]")
    res = spec.resonance(label)
    ratio = res.v / res.u
    l_c = spec.coupler_length

    def _l(x: float) -> float:
        if x <= l_c:
            return 0.5 * (1.0 + ratio) * x
        return ratio * x + 0.5 * (1.0 - ratio) * l_c

    return _l(z), _l(spec.ring_length)


def solve_round_trip_amplitude(finesse: float) -> float:
    """Round-trip amplitude factor rho = sigma_bar*xi from a finesse target.

    Inverts F = pi*sqrt(rho)/(1 - rho) (finesse = FSR / full width).
    """
    if finesse <= 1.0:
        raise InfeasibleTargetError("finesse target must exceed 1")
    # F*rho + pi*sqrt(rho) - F = 0, quadratic in sqrt(rho)
    sqrt_rho = (-math.pi + math.sqrt(math.pi**2 + 4.0 * finesse**2)) / (2.0 * finesse)
    rho = sqrt_rho**2
    if not 0.0 < rho < 1.0:
        raise InfeasibleTargetError(f"no round-trip amplitude in (0,1) for F={finesse}")
    return rho


def calibrate_coupling(
    finesse: float,
    eta_esc: float,
    n_ring: int,
    branch: int = 0,
    *,
    coupler_length: float,
    v: float,
    u: float,
    delta_beta: float = 0.0,
) -> tuple[float, float, float, float]:
    """Solve device couplings from finesse and escape-efficiency targets.

    Returns
    -------
    sigma_bar : float
        Net single-pass self-coupling magnitude at resonance center.
    xi : float
        Single-pass amplitude survival.
    sigma_ph : float
        Uniform per-channel phantom self-coupling, xi**(1/n_ring).
    alpha0 : float
        Coupler envelope wavenumber [rad/um] reproducing sigma_bar for the
        requested branch.
    """
    if not 0.0 < eta_esc <= 1.0:
        raise InfeasibleTargetError("escape efficiency must lie in (0, 1]")
    rho = solve_round_trip_amplitude(finesse)
    xi = math.sqrt(eta_esc + rho**2 * (1.0 - eta_esc))
    sigma_bar = rho / xi
    if sigma_bar >= 1.0:
        raise InfeasibleTargetError("targets require sigma_bar >= 1")
    sigma_ph = xi ** (1.0 / n_ring) if n_ring > 0 else 1.0
    kappa_bar = math.sqrt(1.0 - sigma_bar**2)

    if delta_beta == 0.0:
        alpha0 = (math.asin(kappa_bar) + _TWO_PI * branch) / coupler_length
    else:
        # |kappa_bar(k_J)| = (alpha0/alpha)|sin(alpha*L_c)|, alpha^2 = (db/2)^2+alpha0^2
        from scipy.optimize import brentq

        half_db = 0.5 * abs(delta_beta)

        def mismatch(a0: float) -> float:
            alpha = math.hypot(half_db, a0)
            return (a0 / alpha) * abs(math.sin(alpha * coupler_length)) - kappa_bar

        lo = 1.0e-12
        hi = (math.pi / 2.0 + _TWO_PI * branch) / coupler_length
        # the crossover amplitude is capped below 1 when delta_beta != 0
        if mismatch(hi) < 0.0:
            raise InfeasibleTargetError(
                "phase mismatch too large for the requested coupling"
            )
        alpha0 = brentq(mismatch, lo, hi, xtol=1.0e-15)
    return sigma_bar, xi, sigma_ph, alpha0


def figures_of_merit(spec: DeviceSpec, label: str) -> dict:
    """Linewidth, escape efficiency, finesse and peak enhancement.

    Returns a dict with keys ``gamma_mhz`` (half width at half maximum of
    the resonance, MHz), ``gamma_k`` (the same in rad/um), ``eta_esc``,
    ``finesse`` and ``peak_enhancement`` (|F_J(0)|^2).
    """
    from .coupler import coupler_envelopes

    res = spec.resonance(label)
    env = coupler_envelopes(spec, label, spec.coupler_length, res.k_wg)
    sigma_bar = abs(env.sigma)
    kappa_bar = abs(env.kappa)
    xi = spec.phantom.xi
    rho = sigma_bar * xi
    if rho >= 1.0:
        raise UnphysicalDeviceError(f"sigma_bar*xi = {rho} >= 1")
    _, l_tilde = map_path(spec, label, spec.ring_length)
    gamma_k = (1.0 - rho) / (math.sqrt(rho) * l_tilde)          # HWHM [rad/um]
    gamma_mhz = res.v * gamma_k / _TWO_PI * 1.0e6                # HWHM [MHz]
    eta = (1.0 - sigma_bar**2) * xi**2 / (1.0 - sigma_bar**2 * xi**2)
    finesse = math.pi * math.sqrt(rho) / (1.0 - rho)
    peak = kappa_bar**2 / (1.0 - rho) ** 2
    return {
        "gamma_mhz": gamma_mhz,
        "gamma_k": gamma_k,
        "eta_esc": eta,
        "finesse": finesse,
        "peak_enhancement": peak,
    }


def build_k_grid(spec: DeviceSpec, label: str, n_r: float, n_k: int) -> ResonanceWindow:
    """Uniform wavevector window of total span n_r linewidths around k_J.

    Parameters
    ----------
    spec : DeviceSpec
    label : str
    n_r : float
        Window span in units of the resonance HWHM.
    n_k : int
        Number of bins; must be odd and >= 3 so k_J is a grid point.
    """
    if n_k < 3 or n_k % 2 == 0:
        raise ConfigurationError("n_k must be odd and >= 3")
    if n_r <= 0:
        raise ConfigurationError("n_r must be positive")
    fom = figures_of_merit(spec, label)
    half_span = 0.5 * n_r * fom["gamma_k"]
    fsr_k = _TWO_PI / spec.ring_length
    if half_span >= 0.5 * fsr_k:
        raise ConfigurationError(
            f"window span {2*half_span:.3g} rad/um reaches the free spectral "
            f"range {fsr_k:.3g}; reduce n_r"
        )
    res = spec.resonance(label)
    k = res.k_wg + np.linspace(-half_span, half_span, n_k)
    return ResonanceWindow(label=label, k=k, k_center=res.k_wg)


def nearest_neighbor_resonances(
    *,
    ring_length: float,
    lambda_p: float,
    n_eff: float,
    v: float,
    u: float | None = None,
) -> tuple[ResonanceSpec, ResonanceSpec, ResonanceSpec]:
    """Signal, pump, idler resonances on adjacent longitudinal orders.

    The pump carrier is snapped to the nearest ring resonance
    (k * L_r = 2*pi*m); signal and idler sit one free spectral range above
    and below, so omega_S + omega_I = 2*omega_P exactly.
    """
    if u is None:
        u = v
    omega_p = _TWO_PI * C_LIGHT / lambda_p
    k_raw = _TWO_PI * n_eff / lambda_p
    m = round(k_raw * ring_length / _TWO_PI)
    k_p = _TWO_PI * m / ring_length
    dk = _TWO_PI / ring_length
    domega = v * dk

    def make(label: str, sign: int) -> ResonanceSpec:
        return ResonanceSpec(
            label=label,
            omega=omega_p + sign * domega,
            k_wg=k_p + sign * dk,
            k_ring=k_p + sign * dk,
            v=v,
            u=u,
        )

    return make("S", +1), make("P", 0), make("I", -1)


def make_device(
    *,
    finesse: float,
    eta_esc: float,
    radius: float = 120.0,
    coupler_fraction: float = 0.25,
    lambda_p: float = 1.55,
    n_eff: float = 2.0,
    v: float = 150.0,
    u: float | None = None,
    gamma_nl_per_mw_m: float = 1.0,
    n_ring: int = 20,
    branch: int = 0,
    loss_profile: np.ndarray | None = None,
) -> DeviceSpec:
    """Build and calibrate the default three-resonance device.

    Parameters mirror the standard operating point: a 120 um effective
    radius ring with the coupler extending over a quarter of the
    circumference, pumped at 1550 nm with group velocity 1.5e8 m/s.

    ``loss_profile``, when given, must have length ``n_ring``; it is
    normalised so the per-channel self-couplings keep the calibrated
    single-pass survival xi while distributing loss non-uniformly.
    """
    from .units import nonlinear_param_internal

    ring_length = _TWO_PI * radius
    coupler_length = coupler_fraction * ring_length
    if u is None:
        u = v
    s, p, i = nearest_neighbor_resonances(
        ring_length=ring_length, lambda_p=lambda_p, n_eff=n_eff, v=v, u=u
    )
    sigma_bar, xi, sigma_ph, alpha0 = calibrate_coupling(
        finesse,
        eta_esc,
        n_ring,
        branch,
        coupler_length=coupler_length,
        v=v,
        u=u,
        delta_beta=p.delta_beta,
    )
    positions = np.arange(n_ring) * ring_length / n_ring
    if loss_profile is None:
        sigma_ring = np.full(n_ring, sigma_ph)
    else:
        profile = np.asarray(loss_profile, dtype=float)
        if profile.shape != (n_ring,) or np.any(profile <= 0.0):
            raise ConfigurationError("loss_profile must be n_ring positive weights")
        # distribute log-loss with the given weights, keep total xi fixed
        log_total = math.log(xi)
        sigma_ring = np.exp(log_total * profile / profile.sum())
    wg_indices = np.nonzero(positions < coupler_length)[0]
    phantom = PhantomLayout(
        ring_positions=positions, sigma_ring=sigma_ring, wg_indices=wg_indices
    )
    omega_c = alpha0 * math.sqrt(v * u)
    return DeviceSpec(
        ring_length=ring_length,
        coupler_length=coupler_length,
        omega_c=omega_c,
        branch=branch,
        resonances=(s, p, i),
        gamma_nl=nonlinear_param_internal(gamma_nl_per_mw_m),
        phantom=phantom,
        sigma_bar_design=sigma_bar,
    )
