"""Asymptotic-in/out mode construction for the lossy ring network.

Every (resonance, wavevector) pair defines a linear scattering problem:
the bus waveguide plus one phantom channel per loss point, coupled by
unitary 2x2 splices and the analytic coupler kernel.  Channel 0 is the
real waveguide; channels 1..n_ring are ring phantom channels in position
order; the remaining channels tap the waveguide inside the coupling
region, paired one for one with the ring channels there.

Amplitudes are marched in flux normalisation (sqrt(group velocity) x
envelope) so every splice and coupler section is exactly unitary and the
scattering matrix S(J,k) is unitary to machine precision.

The local basis combines asymptotic-in modes so each local mode's field
in the nonlinear region is confined between adjacent coupling points.
Combination coefficients are obtained by cancelling the guided
amplitudes just after the next coupling point; by uniqueness this
reproduces the closed-form two-mode (ring) and paired four-coefficient
(coupler) constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coupler import coupler_flux_transfer
from .device import ConfigurationError, DeviceSpec


class SingularRoundTripError(ArithmeticError):
    """The steady-state ring closure is singular at this wavevector."""


@dataclass(frozen=True)
class Site:
    """One coupling position along the straightened ring."""

    position: float
    ring_channel: int
    wg_channel: int | None      # None when the site has no waveguide partner
    in_coupler: bool            # position strictly inside [0, L_c)


@dataclass(frozen=True)
class Segment:
    """Ring interval between adjacent coupling points."""

    index: int
    start_site: int
    end_site: int
    z_start: float
    z_end: float                # unwrapped; the last segment ends at L_r
    wraps: bool
    kind: str                   # "pair" or "ring"
    modes: tuple[int, ...]      # channels anchored at the start site


def build_sites(spec: DeviceSpec) -> list[Site]:
    ph = spec.phantom
    n_ring = ph.n_ring
    wg_lookup = {int(idx): n_ring + 1 + j for j, idx in enumerate(ph.wg_indices)}
    sites = []
    for n in range(n_ring):
        pos = float(ph.ring_positions[n])
        sites.append(
            Site(
                position=pos,
                ring_channel=1 + n,
                wg_channel=wg_lookup.get(n),
                in_coupler=pos < spec.coupler_length,
            )
        )
    return sites


def build_segments(spec: DeviceSpec, sites: list[Site]) -> list[Segment]:
    segs = []
    n = len(sites)
    for i, site in enumerate(sites):
        wraps = i == n - 1
        z_end = spec.ring_length if wraps else sites[i + 1].position
        kind = "pair" if site.wg_channel is not None else "ring"
        modes = (
            (site.wg_channel, site.ring_channel)
            if site.wg_channel is not None
            else (site.ring_channel,)
        )
        segs.append(
            Segment(
                index=i,
                start_site=i,
                end_site=(i + 1) % n,
                z_start=site.position,
                z_end=z_end,
                wraps=wraps,
                kind=kind,
                modes=modes,
            )
        )
    return segs


@dataclass
class AsymptoticBasis:
    """March records for all asymptotic-in modes on a wavevector grid.

    Arrays are indexed (k, site, input channel) unless noted.  ``w_after``
    and ``r_after`` hold the waveguide/ring flux amplitudes just after the
    splices at each site; ``smatrix`` maps input channels to output
    channels and is unitary.
    """

    label: str
    k: np.ndarray                        # (nk,)
    sites: list[Site]
    segments: list[Segment]
    w_after: np.ndarray                  # (nk, n_sites, c); nan outside coupler
    r_after: np.ndarray                  # (nk, n_sites, c)
    smatrix: np.ndarray                  # (nk, c, c)
    ring_arrive: np.ndarray              # (nk, c) flux arriving at L_r
    w_start: np.ndarray                  # (nk, c) waveguide flux at z = 0-
    r_start: np.ndarray                  # (nk, c) ring flux at z = 0- (pre-splice)

    @property
    def n_channels(self) -> int:
        return self.smatrix.shape[-1]


def _march(spec: DeviceSpec, label: str, k: np.ndarray) -> AsymptoticBasis:
    """Steady-state solve of the splice network for every input channel."""
    res = spec.resonance(label)
    ph = spec.phantom
    sites = build_sites(spec)
    segments = build_segments(spec, sites)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    nk = len(k)
    c = ph.n_total + 1
    ncols = c + 1                        # extra column: unit ring seed
    l_c = spec.coupler_length
    l_r = spec.ring_length
    dk = k - res.k_wg
    ratio = res.v / res.u

    sigma = np.concatenate([[np.nan], ph.sigma_ring, ph.sigma_wg])
    kappa = np.concatenate([[np.nan], ph.kappa_ring, ph.kappa_wg])

    w_cur = np.zeros((nk, ncols), complex)
    r_cur = np.zeros((nk, ncols), complex)
    w_cur[:, 0] = 1.0                    # channel 0: unit waveguide input
    r_cur[:, c] = 1.0                    # seed column: unit ring amplitude at 0-
    w_start = w_cur.copy()
    r_start = r_cur.copy()

    n_sites = len(sites)
    w_after = np.full((nk, n_sites, ncols), np.nan + 0j)
    r_after = np.empty((nk, n_sites, ncols), complex)
    outputs = np.zeros((nk, c, ncols), complex)

    def couple(z_a: float, z_b: float) -> None:
        nonlocal w_cur, r_cur
        if z_b == z_a:
            return
        t = coupler_flux_transfer(spec, label, z_a, z_b, k)  # (nk, 2, 2)
        w_new = t[:, 0, 0, None] * w_cur + t[:, 0, 1, None] * r_cur
        r_new = t[:, 1, 0, None] * w_cur + t[:, 1, 1, None] * r_cur
        w_cur, r_cur = w_new, r_new

    def splice(channel: int, host: np.ndarray) -> np.ndarray:
        s, q = sigma[channel], kappa[channel]
        inp = np.zeros(ncols, complex)
        inp[channel] = 1.0
        outputs[:, channel, :] = -1j * q * host + s * inp
        return s * host - 1j * q * inp

    z_prev = 0.0
    inside = True
    for i, site in enumerate(sites):
        if site.in_coupler:
            couple(z_prev, site.position)
            z_prev = site.position
            if site.wg_channel is not None:
                w_cur = splice(site.wg_channel, w_cur)
            r_cur = splice(site.ring_channel, r_cur)
            w_after[:, i, :] = w_cur
            r_after[:, i, :] = r_cur
        else:
            if inside:
                couple(z_prev, l_c)
                outputs[:, 0, :] = w_cur     # through port
                z_prev = l_c
                inside = False
            r_cur = r_cur * np.exp(1j * ratio * dk * (site.position - z_prev))[:, None]
            z_prev = site.position
            r_cur = splice(site.ring_channel, r_cur)
            r_after[:, i, :] = r_cur
    if inside:
        couple(z_prev, l_c)
        outputs[:, 0, :] = w_cur
        z_prev = l_c
    r_cur = r_cur * np.exp(1j * ratio * dk * (l_r - z_prev))[:, None]

    # close the ring: physical solution for channel n adds x_n times the
    # seed column, with x_n = arrive_n / (1 - arrive_seed)
    arrive = r_cur
    loop = arrive[:, c]
    denom = 1.0 - loop
    if np.any(np.abs(denom) < 1.0e-14):
        raise SingularRoundTripError(
            f"singular ring closure for {label}: |1 - round trip| < 1e-14"
        )
    x = arrive[:, :c] / denom[:, None]   # (nk, c)

    def fold(rec: np.ndarray) -> np.ndarray:
        if rec.ndim == 3:
            return rec[..., :c] + rec[..., c, None] * x[:, None, :]
        return rec[:, :c] + rec[:, c, None] * x

    return AsymptoticBasis(
        label=label,
        k=k,
        sites=sites,
        segments=segments,
        w_after=fold(w_after),
        r_after=fold(r_after),
        smatrix=fold(outputs),
        ring_arrive=fold(arrive),
        w_start=fold(w_start),
        r_start=fold(r_start),
    )


def build_asymptotic_in(spec: DeviceSpec, label: str, k) -> AsymptoticBasis:
    """Asymptotic-in basis: steady network response per input channel."""
    return _march(spec, label, np.atleast_1d(np.asarray(k, dtype=float)))


def field_at(
    spec: DeviceSpec,
    basis: AsymptoticBasis,
    coefficients: np.ndarray,
    z: float,
    k_index: int = 0,
) -> tuple[complex | None, complex]:
    """Flux amplitudes (waveguide, ring) of a mode combination at z.

    ``coefficients`` weighs the asymptotic-in modes; pass a unit vector
    for a single mode or a local-basis row for a local mode.  The
    waveguide amplitude is ``None`` outside the coupling region.
    """
    label = basis.label
    l_c = spec.coupler_length
    if not 0.0 <= z <= spec.ring_length:
        raise ConfigurationError("z outside the ring")
    sites = basis.sites
    idx = max(i for i, s in enumerate(sites) if s.position <= z)
    site = sites[idx]
    res = spec.resonance(label)
    dk = basis.k[k_index] - res.k_wg
    ratio = res.v / res.u
    r0 = basis.r_after[k_index, idx] @ coefficients
    if site.in_coupler:
        w0 = basis.w_after[k_index, idx] @ coefficients
        if z <= l_c:
            t = coupler_flux_transfer(spec, label, site.position, z, basis.k[k_index])
            return t[0, 0] * w0 + t[0, 1] * r0, t[1, 0] * w0 + t[1, 1] * r0
        t = coupler_flux_transfer(spec, label, site.position, l_c, basis.k[k_index])
        r = t[1, 0] * w0 + t[1, 1] * r0
        return None, r * np.exp(1j * ratio * dk * (z - l_c))
    return None, r0 * np.exp(1j * ratio * dk * (z - site.position))


@dataclass
class BasisTransform:
    """Local-basis transformation matrices on a wavevector grid.

    ``l_in[k]`` maps asymptotic-in field distributions to local ones
    (rows = local modes); ``g_in`` is its inverse.  Operators transform
    as a_loc = g_in^T a_in.  The commutator matrix is
    C = g^T conj(g), identical whether built from the in or out side.
    """

    label: str
    k: np.ndarray
    l_in: np.ndarray        # (nk, c, c)
    l_out: np.ndarray
    g_in: np.ndarray
    g_out: np.ndarray
    segments: list[Segment]
    sites: list[Site]


def build_local_transform(
    spec: DeviceSpec, label: str, k, basis: AsymptoticBasis | None = None
) -> BasisTransform:
    """Construct L_in, L_out and inverses from cancellation conditions.

    Each local mode is anchored at one channel; its row combines the
    anchor with the channel(s) at the next coupling point so the guided
    field vanishes downstream.  Requires every phantom coupling to be
    nonzero.
    """
    if basis is None:
        basis = build_asymptotic_in(spec, label, k)
    k = basis.k
    nk = len(k)
    ph = spec.phantom
    c = basis.n_channels
    sites, segments = basis.sites, basis.segments
    if ph.n_total == 0:
        l_in = np.broadcast_to(np.eye(1, dtype=complex), (nk, 1, 1)).copy()
    else:
        if ph.n_ring < 2:
            raise ConfigurationError(
                "at least two ring phantom channels are needed to anchor "
                "a local basis"
            )
        if np.any(ph.kappa_ring == 0.0) or np.any(ph.kappa_wg == 0.0):
            raise ConfigurationError(
                "phantom channel with zero coupling cannot anchor a local mode; "
                "use a small nonzero loss instead"
            )
        l_in = np.zeros((nk, c, c), complex)

        # channel 0: cancel the transmitted waveguide amplitude at site 0
        w0 = sites[0].wg_channel
        if w0 is None:
            raise ConfigurationError(
                "first ring coupling point must carry a waveguide partner channel"
            )
        l_in[:, 0, 0] = 1.0
        l_in[:, 0, w0] = -basis.w_after[:, 0, 0] / basis.w_after[:, 0, w0]

        for seg in segments:
            end = sites[seg.end_site]
            need_w = (not seg.wraps) and end.in_coupler and end.wg_channel is not None
            for anchor in seg.modes:
                row = np.zeros((nk, c), complex)
                row[:, anchor] = 1.0
                if need_w:
                    m = np.empty((nk, 2, 2), complex)
                    rhs = np.empty((nk, 2), complex)
                    we, re_ = end.wg_channel, end.ring_channel
                    m[:, 0, 0] = basis.w_after[:, seg.end_site, we]
                    m[:, 0, 1] = basis.w_after[:, seg.end_site, re_]
                    m[:, 1, 0] = basis.r_after[:, seg.end_site, we]
                    m[:, 1, 1] = basis.r_after[:, seg.end_site, re_]
                    rhs[:, 0] = basis.w_after[:, seg.end_site, anchor]
                    rhs[:, 1] = basis.r_after[:, seg.end_site, anchor]
                    coef = np.linalg.solve(m, rhs[:, :, None])[:, :, 0]
                    row[:, we] = -coef[:, 0]
                    row[:, re_] = -coef[:, 1]
                else:
                    re_ = end.ring_channel
                    coef = (
                        basis.r_after[:, seg.end_site, anchor]
                        / basis.r_after[:, seg.end_site, re_]
                    )
                    row[:, re_] = -coef
                l_in[:, anchor, :] = row

    g_in = np.linalg.inv(l_in)
    st = np.swapaxes(basis.smatrix, -1, -2)
    l_out = l_in @ st
    g_out = np.linalg.inv(l_out)
    return BasisTransform(
        label=label,
        k=k,
        l_in=l_in,
        l_out=l_out,
        g_in=g_in,
        g_out=g_out,
        segments=segments,
        sites=sites,
    )


def commutator_matrix(transform: BasisTransform, side: str = "in") -> np.ndarray:
    """Local-basis commutator matrices C(k), shape (nk, c, c).

    C_{nn'} = sum_m [G]_{mn} [G]*_{mn'} with G the inverse transformation,
    following from a_loc = G^T a_in; Hermitian and positive semidefinite.
    The "out" side must give the same result.
    """
    g = transform.g_in if side == "in" else transform.g_out
    return np.swapaxes(g, -1, -2) @ np.conj(g)


def change_basis(
    amplitudes: np.ndarray, transform: BasisTransform, direction: str
) -> np.ndarray:
    """Convert channel amplitude vectors between bases.

    ``amplitudes`` has shape (nk, c) (or (c,) broadcast over a single k).
    Directions: "in->loc", "loc->in", "loc->out", "out->loc".
    """
    amp = np.asarray(amplitudes, dtype=complex)
    squeeze = amp.ndim == 1
    if squeeze:
        amp = amp[None, :]
    if amp.shape != (len(transform.k), transform.l_in.shape[-1]):
        raise ConfigurationError(
            f"amplitude shape {amp.shape} does not match the transform grid"
        )
    mats = {
        "in->loc": np.swapaxes(transform.g_in, -1, -2),
        "loc->in": np.swapaxes(transform.l_in, -1, -2),
        "loc->out": np.swapaxes(transform.l_out, -1, -2),
        "out->loc": np.swapaxes(transform.g_out, -1, -2),
    }
    try:
        mat = mats[direction]
    except KeyError:
        raise ConfigurationError(f"unknown direction {direction!r}") from None
    out = np.einsum("knm,km->kn", mat, amp)
    return out[0] if squeeze else out


def dump_envelopes(
    spec: DeviceSpec,
    basis: AsymptoticBasis,
    path: str,
    n_samples: int = 200,
) -> None:
    """Write sampled asymptotic-in envelopes to a tabular text file."""
    res = spec.resonance(basis.label)
    zs = np.linspace(0.0, spec.ring_length, n_samples)
    c = basis.n_channels
    with open(path, "w") as fh:
        fh.write("# J k channel region z re_h im_h\n")
        for ki, kv in enumerate(basis.k):
            for n in range(c):
                coeff = np.zeros(c)
                coeff[n] = 1.0
                for z in zs:
                    w, r = field_at(spec, basis, coeff, float(z), ki)
                    h_r = r * math.sqrt(res.v / res.u)
                    fh.write(
                        f"{basis.label} {kv:.17g} {n} ring {z:.6f} "
                        f"{h_r.real:.17g} {h_r.imag:.17g}\n"
                    )
                    if w is not None:
                        fh.write(
                            f"{basis.label} {kv:.17g} {n} wg {z:.6f} "
                            f"{w.real:.17g} {w.imag:.17g}\n"
                        )
