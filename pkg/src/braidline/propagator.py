"""Free-particle propagator kernels, causal wrapping, composition,
residual checks and conjugation.

Kernel matrices are stored weight-free: K[x, y] with x the target point and
y the source point, applied through the Jackson-weighted contraction
(K f)(x) = sum_y K[x, y] w(y) f(y).  The four variants share one evolution
phase exp(-i E (t_target - t_source)); their displayed source-time scalings
cancel against the scaled momentum labels (that cancellation is exactly the
boundary-limit argument), so the variant distinction is carried by
geometry, conjugation flags and the stored scaling metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .basis import WaveBasis, delta_kernel
from .qcalc import G1, G2, LatticeFunction

# variant name -> (family, starred, primed)
VARIANTS = {
    "K1prime": (1, False, True),
    "K2": (2, False, False),
    "K1star": (1, True, False),
    "K2starPrime": (2, True, True),
    # conjugation partners of the four canonical kernels
    "K1": (1, False, False),
    "K2prime": (2, False, True),
    "K1starPrime": (1, True, True),
    "K2star": (2, True, False),
}

CAUSALITY_NONE = "none"
RETARDED = "retarded"
ADVANCED = "advanced"


def heaviside(t: float) -> float:
    """theta(t) = 1 for t >= 0, else 0.  The t = 0 slice is included."""
    return 1.0 if t >= 0.0 else 0.0


def source_time_scale(variant: str, ctx) -> float:
    """Literal source-time scaling of the displayed kernel definitions.

    Metadata only: the scaling is absorbed by the scaled momentum labels
    and the net evolution phase depends on t_target - t_source alone.
    """
    family, starred, primed = VARIANTS[variant]
    q, kappa, zeta = ctx.q, ctx.kappa, ctx.zeta
    if family == 1:
        return -(q ** zeta) * kappa ** -2 if primed else -(q ** -zeta)
    return -(q ** -zeta) * kappa ** 2 if not primed else -(q ** zeta)


@dataclass
class PropagatorKernel:
    basis: WaveBasis
    variant: str
    t_source: float
    t_target: float
    matrix: np.ndarray
    tilde: bool = False
    causality: str = CAUSALITY_NONE

    @property
    def family(self) -> int:
        return VARIANTS[self.variant][0]

    @property
    def ctx(self):
        return self.basis.ctx

    def apply(self, f: LatticeFunction) -> LatticeFunction:
        if f.lattice != self.basis.lattice:
            raise ValueError("lattice mismatch")
        vals = self.matrix @ (self.basis.weights * f.values)
        return LatticeFunction(f.lattice, vals, time=self.t_target)


def _phase_sign(tilde: bool) -> float:
    # Tilde partners carry the conjugate phase convention (positive energy
    # travelling backwards in time).
    return 1.0 if tilde else -1.0


def free_propagator(
    basis: WaveBasis,
    variant: str,
    t_source: float,
    t_target: float,
    tilde: bool = False,
) -> PropagatorKernel:
    """Spectral kernel evolving the source slice to the target slice."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    family = VARIANTS[variant][0]
    expected = G1 if family == 1 else G2
    if basis.ctx.geometry != expected:
        raise ValueError(
            f"variant {variant} belongs to geometry {expected}, "
            f"basis context is {basis.ctx.geometry}"
        )
    dt = t_target - t_source
    phase = np.exp(_phase_sign(tilde) * 1j * basis.energies * dt)
    u = np.conj(basis.vectors) if tilde else basis.vectors
    mat = (u * phase) @ u.conj().T
    return PropagatorKernel(
        basis=basis, variant=variant, t_source=t_source, t_target=t_target,
        matrix=mat, tilde=tilde, causality=CAUSALITY_NONE,
    )


def make_retarded(kernel: PropagatorKernel) -> PropagatorKernel:
    """Multiply by theta(t_target - t_source)."""
    if kernel.causality != CAUSALITY_NONE:
        raise ValueError("kernel already causal")
    theta = heaviside(kernel.t_target - kernel.t_source)
    return replace(kernel, matrix=theta * kernel.matrix, causality=RETARDED)


def make_advanced(kernel: PropagatorKernel) -> PropagatorKernel:
    """Time-reflected counterpart: K_-(t_y, t_x) = K_+(-t_y, -t_x)."""
    if kernel.causality != CAUSALITY_NONE:
        raise ValueError("kernel already causal")
    reflected = free_propagator(
        kernel.basis, kernel.variant, -kernel.t_source, -kernel.t_target,
        tilde=kernel.tilde,
    )
    theta = heaviside(-kernel.t_target + kernel.t_source)
    return PropagatorKernel(
        basis=kernel.basis, variant=kernel.variant,
        t_source=kernel.t_source, t_target=kernel.t_target,
        matrix=theta * reflected.matrix, tilde=kernel.tilde,
        causality=ADVANCED,
    )


def compose(k1: PropagatorKernel, k2: PropagatorKernel) -> PropagatorKernel:
    """Jackson-weighted composition of k1 (earlier) with k2 (later).

    For the starred variants the displayed composition scales the
    intermediate coordinate by kappa; the change of variables multiplies
    the measure by kappa**-n while the kernel prefactor contributes
    kappa**n, so the contraction reduces exactly to the plain weighted
    product.  The bookkeeping factor is computed explicitly to keep that
    cancellation visible.
    """
    if k1.basis is not k2.basis and k1.basis.lattice != k2.basis.lattice:
        raise ValueError("basis mismatch")
    if k1.variant != k2.variant or k1.tilde != k2.tilde:
        raise ValueError("variant mismatch")
    if k1.t_target != k2.t_source:
        raise ValueError("intermediate times do not match")
    starred = VARIANTS[k1.variant][1]
    n_dim = 1
    kappa_factor = 1.0
    if starred:
        # kernel prefactor kappa**(+-n) times the measure Jacobian kappa**(-+n)
        kappa = k1.ctx.kappa
        kappa_factor = (kappa ** n_dim) * (kappa ** -n_dim)
    # The product is evaluated in the weight-symmetrised frame, where the
    # kernels are unitary and entries stay O(1); this keeps the entrywise
    # roundoff of the contraction below the identity tolerances.
    w = k1.basis.weights
    sw = np.sqrt(w)
    a2 = (sw[:, None] * k2.matrix) * sw[None, :]
    a1 = (sw[:, None] * k1.matrix) * sw[None, :]
    mat = kappa_factor * ((a2 @ a1) / sw[:, None] / sw[None, :])
    causality = k1.causality if k1.causality == k2.causality else CAUSALITY_NONE
    return PropagatorKernel(
        basis=k1.basis, variant=k1.variant,
        t_source=k1.t_source, t_target=k2.t_target,
        matrix=mat, tilde=k1.tilde, causality=causality,
    )


def _hamiltonian_action(basis: WaveBasis, mat: np.ndarray) -> np.ndarray:
    """H0 applied to the target leg of a kernel matrix."""
    u = basis.vectors
    coeff = u.conj().T @ (basis.weights[:, None] * mat)
    return u @ (basis.energies[:, None] * coeff)


def schrodinger_residual(kernel: PropagatorKernel) -> float:
    """|| i d_t K - (+-) H0 K ||_F with the analytic time derivative.

    Retarded and bare kernels satisfy the +H0 equation, advanced kernels
    the sign-flipped one.  Must be called off the source slice.
    """
    if kernel.t_target == kernel.t_source:
        raise ValueError("residual undefined on the source slice")
    dt = kernel.t_target - kernel.t_source
    theta = 1.0
    if kernel.causality == RETARDED:
        theta = heaviside(dt)
    elif kernel.causality == ADVANCED:
        theta = heaviside(-dt)
    s_eff = _phase_sign(kernel.tilde)
    if kernel.causality == ADVANCED:
        s_eff = -s_eff
    u = np.conj(kernel.basis.vectors) if kernel.tilde else kernel.basis.vectors
    e = kernel.basis.energies
    phase = np.exp(s_eff * 1j * e * dt)
    # i d_t acting on exp(s i E dt) brings down -s E per mode
    dmat = theta * ((u * (-s_eff * e * phase)) @ u.conj().T)
    h_sign = -1.0 if kernel.causality == ADVANCED else 1.0
    # tilde kernels obey the conjugated equation, flipping H0 once more
    if kernel.tilde:
        h_sign = -h_sign
    hk = _hamiltonian_action(kernel.basis, kernel.matrix)
    return float(np.linalg.norm(dmat - h_sign * hk))


def source_term(kernel: PropagatorKernel) -> tuple[complex, np.ndarray]:
    """Delta-source data of the causal Schroedinger equation.

    Returns (prefactor, scaled_delta): the jump of the retarded kernel at
    the source slice times i must equal prefactor * scaled_delta, with
    prefactor = i kappa**n / vol and scaled_delta the completeness kernel
    at kappa-scaled argument, which absorbs a Jacobian kappa**-n.
    """
    n_dim = 1
    kappa = kernel.ctx.kappa
    prefactor = 1j * kappa ** n_dim / kernel.basis.vol
    scaled_delta = (kappa ** -n_dim) * delta_kernel(kernel.basis)
    if kernel.tilde:
        scaled_delta = np.conj(scaled_delta)
    return prefactor, scaled_delta


def conjugate_kernel(kernel: PropagatorKernel) -> PropagatorKernel:
    """Entrywise conjugate; toggles the tilde and prime flags.

    The conjugate of each kernel is its tilde partner with the prime
    toggled, evaluated at the same arguments (the displayed time
    reflections are internal to the partner's definition).  The map is an
    involution.
    """
    family, starred, primed = VARIANTS[kernel.variant]
    partner = _variant_name(family, starred, not primed)
    return PropagatorKernel(
        basis=kernel.basis, variant=partner,
        t_source=kernel.t_source, t_target=kernel.t_target,
        matrix=np.conj(kernel.matrix), tilde=not kernel.tilde,
        causality=kernel.causality,
    )


def _variant_name(family: int, starred: bool, primed: bool) -> str:
    for name, key in VARIANTS.items():
        if key == (family, starred, primed):
            return name
    raise KeyError((family, starred, primed))


def solve_inhomogeneous(
    sources: list[LatticeFunction],
    basis: WaveBasis,
    variant: str,
    times: np.ndarray,
    t_eval: np.ndarray,
    advanced: bool = False,
) -> list[LatticeFunction]:
    """psi(t) = -+ i * sum_s dt (K_+- rho)(t; s) over the uniform source grid.

    Trapezoidal quadrature in time; the spatial contraction is the
    Jackson-weighted kernel application.  The residual of the Schroedinger
    operator applied to the result reproduces the source to O(dt^2).
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("empty time window")
    if times.size > 1:
        steps = np.diff(times)
        if not np.allclose(steps, steps[0]):
            raise ValueError("source grid must be uniform")
        dt = float(steps[0])
    else:
        dt = 1.0
    trap = np.full(times.size, dt)
    if times.size > 1:
        trap[0] = trap[-1] = 0.5 * dt
    sign = 1j if advanced else -1j
    out = []
    for t in np.asarray(t_eval, dtype=float):
        acc = np.zeros(basis.lattice.size, dtype=complex)
        for wgt, ts, rho in zip(trap, times, sources):
            bare = free_propagator(basis, variant, ts, t)
            causal = make_advanced(bare) if advanced else make_retarded(bare)
            acc += wgt * causal.apply(rho).values
        out.append(LatticeFunction(basis.lattice, sign * acc, time=float(t)))
    return out
