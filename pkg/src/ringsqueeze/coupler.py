"""Analytic solution of the finite-length directional coupler.

The coupled envelope equations inside the coupling region reduce to a
2x2 linear system with constant coefficients (after factoring carrier
phases), so the transfer over any sub-interval is a closed-form matrix
of sinusoidal envelopes.  These kernels feed both the lossless ring
response and the phantom-channel scattering network.

Sign convention: the envelope parameter ``gamma`` is kept *signed*
(gamma = mu_minus / alpha_k); its square matches the usual definition
and the sign is required for the transfer matrix to solve the coupled
equations exactly for arbitrary phase mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .device import DeviceSpec


class PoleSingularError(ArithmeticError):
    """Exact lossless pole hit; the ring response diverges."""


@dataclass(frozen=True)
class CouplerEnvelope:
    """Envelope functions of the coupler at position z and wavevector k."""

    sigma: np.ndarray | complex
    kappa: np.ndarray | complex
    alpha_k: np.ndarray | float
    gamma: np.ndarray | float
    mu_plus: np.ndarray | float
    mu_minus: np.ndarray | float


@dataclass(frozen=True)
class RingResponse:
    """Lossless ring amplitude and waveguide transmission at wavevector k."""

    ring: np.ndarray | complex          # R_J(k), ring envelope just after coupler
    transmission: np.ndarray | complex  # T_J(k)
    sigma_bar: np.ndarray | complex
    kappa_bar: np.ndarray | complex


def _envelope_params(spec: DeviceSpec, label: str, k):
    """mu_plus, mu_minus, alpha_k, alpha0 for wavevector(s) k."""
    res = spec.resonance(label)
    dk = np.asarray(k, dtype=float) - res.k_wg
    ratio = res.v / res.u
    mu1 = dk + 0.5 * res.delta_beta
    mu2 = ratio * dk - 0.5 * res.delta_beta
    mu_plus = 0.5 * (mu1 + mu2)
    mu_minus = 0.5 * (mu1 - mu2)
    alpha0 = spec.alpha0(label)
    alpha_k = np.sqrt(mu_minus**2 + alpha0**2)
    return mu_plus, mu_minus, alpha_k, alpha0


def coupler_envelopes(spec: DeviceSpec, label: str, z, k) -> CouplerEnvelope:
    """Self- and cross-coupling envelopes sigma_J(z;k), kappa_J(z;k).

    Parameters
    ----------
    spec : DeviceSpec
    label : str
        Resonance label.
    z : float or ndarray
        Position inside the coupling region, 0 <= z <= L_c [um].
    k : float or ndarray
        Wavevector [rad/um].

    Returns
    -------
    CouplerEnvelope
        With |sigma|^2 + |kappa|^2 = 1 for every (z, k).
    """
    res = spec.resonance(label)
    mu_plus, mu_minus, alpha_k, alpha0 = _envelope_params(spec, label, k)
    z = np.asarray(z, dtype=float)
    gamma = mu_minus / alpha_k
    phase = np.exp(-0.5j * res.delta_beta * z)
    s = np.sin(alpha_k * z)
    sigma = (np.cos(alpha_k * z) + 1j * gamma * s) * phase
    kappa = (alpha0 / alpha_k) * s * phase
    return CouplerEnvelope(
        sigma=sigma,
        kappa=kappa,
        alpha_k=alpha_k,
        gamma=gamma,
        mu_plus=mu_plus,
        mu_minus=mu_minus,
    )


def coupler_transfer(spec: DeviceSpec, label: str, z, k) -> np.ndarray:
    """Envelope transfer matrix of the coupler from 0 to z.

    Maps (f_wg(0), f_ring(0)) to (f_wg(z), f_ring(z)) for the slowly
    varying envelopes referenced to the waveguide and ring carriers.
    Shape (..., 2, 2) broadcast over z and k.
    """
    res = spec.resonance(label)
    env = coupler_envelopes(spec, label, z, k)
    rv = np.sqrt(res.u / res.v)
    phase = np.exp(1j * env.mu_plus * np.asarray(z, dtype=float))
    out = np.empty(np.broadcast(np.asarray(env.sigma), phase).shape + (2, 2), complex)
    out[..., 0, 0] = env.sigma
    out[..., 0, 1] = -1j * rv * env.kappa
    out[..., 1, 0] = -1j / rv * np.conj(env.kappa)
    out[..., 1, 1] = np.conj(env.sigma)
    return out * phase[..., None, None]


def coupler_flux_transfer(spec: DeviceSpec, label: str, z_a, z_b, k) -> np.ndarray:
    """Unitary transfer of flux-normalised envelopes over [z_a, z_b].

    The flux amplitudes (sqrt(v) f_wg, sqrt(u) f_ring) evolve with a
    symmetric unitary kernel; phantom splices compose with it without
    any group-velocity factors.  Shape (..., 2, 2).
    """
    res = spec.resonance(label)
    mu_plus, mu_minus, alpha_k, alpha0 = _envelope_params(spec, label, k)
    ell = np.asarray(z_b, dtype=float) - np.asarray(z_a, dtype=float)
    s = np.sin(alpha_k * ell)
    sig = np.cos(alpha_k * ell) + 1j * (mu_minus / alpha_k) * s
    kap = (alpha0 / alpha_k) * s
    phase = np.exp(1j * mu_plus * ell)
    # carrier-mismatch boundary phases: tilde frame <-> barred frame
    pa = np.exp(0.5j * res.delta_beta * np.asarray(z_a, dtype=float))
    pb = np.exp(-0.5j * res.delta_beta * np.asarray(z_b, dtype=float))
    out = np.empty(np.broadcast(np.asarray(sig), phase).shape + (2, 2), complex)
    out[..., 0, 0] = sig * pb * pa
    out[..., 0, 1] = -1j * kap * pb / pa
    out[..., 1, 0] = -1j * kap * pa / pb
    out[..., 1, 1] = np.conj(sig) / (pb * pa)
    return out * phase[..., None, None]


def coupler_transfer_segment(
    spec: DeviceSpec, label: str, z_a, z_b, k
) -> np.ndarray:
    """Envelope transfer matrix over a sub-interval [z_a, z_b] of the coupler."""
    res = spec.resonance(label)
    t = coupler_flux_transfer(spec, label, z_a, z_b, k)
    out = t.copy()
    rv = np.sqrt(res.u / res.v)
    out[..., 0, 1] *= rv
    out[..., 1, 0] /= rv
    return out


def intensity_enhancement(spec: DeviceSpec, label: str, k) -> np.ndarray:
    """Effective intensity enhancement |F_J(dk)|^2 including phantom loss.

    The loss enters only through the single-pass survival
    xi = prod(sigma_ph); self- and cross-couplings are the lossless
    coupler envelopes.
    """
    from .device import map_path

    res = spec.resonance(label)
    env = coupler_envelopes(spec, label, spec.coupler_length, k)
    dk = np.asarray(k, dtype=float) - res.k_wg
    _, l_tilde = map_path(spec, label, spec.ring_length)
    xi = spec.phantom.xi
    den = _one_minus_scaled_exp(np.conj(env.sigma) * xi, dk * l_tilde)
    return np.abs(env.kappa) ** 2 / np.abs(den) ** 2


def _one_minus_scaled_exp(c, theta):
    """Numerically stable c_form = 1 - c*exp(i*theta).

    Uses 1 - e^{i t} = -2i sin(t/2) e^{i t/2}, exact for all t, so the
    near-pole case (c -> 1, theta -> 0) keeps full relative accuracy.
    """
    half = 0.5 * np.asarray(theta, dtype=float)
    return (1.0 - c) + c * (-2.0j) * np.sin(half) * np.exp(1j * half)


def ring_response(spec: DeviceSpec, label: str, k) -> RingResponse:
    """Lossless steady-state ring amplitude and waveguide transmission.

    Parameters
    ----------
    spec : DeviceSpec
    label : str
    k : float or ndarray

    Returns
    -------
    RingResponse
        ``ring`` is the envelope circulating in the ring just after the
        coupler for unit waveguide input; ``transmission`` the through
        amplitude (unit modulus for a lossless device).

    Raises
    ------
    PoleSingularError
        If the response sits exactly on a lossless pole.
    """
    from .device import map_path

    res = spec.resonance(label)
    env = coupler_envelopes(spec, label, spec.coupler_length, k)
    dk = np.asarray(k, dtype=float) - res.k_wg
    l_c, l_tilde = map_path(spec, label, spec.coupler_length)
    l_c_eff, _ = l_c, l_tilde
    theta = dk * l_tilde
    den = _one_minus_scaled_exp(np.conj(env.sigma), theta)
    if np.any(np.abs(den) < 1.0e-150):
        raise PoleSingularError(
            f"lossless ring pole at resonance {label}: |1 - sigma* e^(i dk L)| = 0"
        )
    rv = np.sqrt(res.v / res.u)
    ring = -1j * rv * np.conj(env.kappa) / den
    num = -_one_minus_scaled_exp(env.sigma, -theta) * np.exp(1j * theta)
    # num = sigma_bar - e^{i theta}, evaluated stably
    trans = num / den * np.exp(1j * dk * l_c_eff)
    return RingResponse(
        ring=ring, transmission=trans, sigma_bar=env.sigma, kappa_bar=env.kappa
    )
