"""Complex anisotropic total variation and its proximal operator.

The prox ``argmin_O 1/2 ||O - psi||^2 + lam * TV(O)`` is solved in the dual:
minimize ``G(w) = ||psi - D^H w||^2`` over ``|w_i| <= lam`` by accelerated
gradient projection, then ``O = psi - D^H w``.

Gradients are Wirtinger gradients (derivative with respect to ``conj(w)``).
For a real function ``G`` the ordinary gradient over ``(Re w, Im w)`` is
twice the Wirtinger gradient packed as ``re + 1j * im``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cptych._config import TVProxConfig
from cptych._types import ComplexField

_SHRINK = 1.0 - 2.0**-52


@dataclass(frozen=True, eq=False)
class DualState:
    """Horizontal and vertical difference fields.

    ``w_h`` has a structurally zero last column, ``w_v`` a structurally zero
    last row.
    """

    w_h: ComplexField
    w_v: ComplexField

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> DualState:
        return cls(
            np.zeros(shape, dtype=np.complex128), np.zeros(shape, dtype=np.complex128)
        )

    def max_modulus(self) -> float:
        return float(max(np.max(np.abs(self.w_h)), np.max(np.abs(self.w_v))))


def _forward_diff(o: ComplexField) -> tuple[ComplexField, ComplexField]:
    w_h = np.zeros_like(o, dtype=np.complex128)
    w_v = np.zeros_like(o, dtype=np.complex128)
    w_h[:, :-1] = o[:, 1:] - o[:, :-1]
    w_v[:-1, :] = o[1:, :] - o[:-1, :]
    return w_h, w_v


def _adjoint_diff(w_h: ComplexField, w_v: ComplexField) -> ComplexField:
    out = np.zeros_like(w_h, dtype=np.complex128)
    out[:, :-1] -= w_h[:, :-1]
    out[:, 1:] += w_h[:, :-1]
    out[:-1, :] -= w_v[:-1, :]
    out[1:, :] += w_v[:-1, :]
    return out


def diff_forward(o: ComplexField) -> DualState:
    """Non-periodic forward differences along columns (h) and rows (v)."""
    return DualState(*_forward_diff(o))


def diff_adjoint(w: DualState) -> ComplexField:
    """Exact adjoint of :func:`diff_forward` (negative divergence)."""
    return _adjoint_diff(w.w_h, w.w_v)


def tv_seminorm(o: ComplexField) -> float:
    """Anisotropic TV: sum of moduli of vertical and horizontal differences."""
    dv = np.abs(np.diff(o, axis=0)).sum()
    dh = np.abs(np.diff(o, axis=1)).sum()
    return float(dv + dh)


def _clamp(w: ComplexField, lam: float) -> ComplexField:
    mod = np.abs(w)
    over = mod > lam
    if not np.any(over):
        return w
    out = w.copy()
    out[over] *= lam / mod[over]
    # Rounding can leave a rescaled entry one ulp outside the disk.
    spill = np.abs(out) > lam
    while np.any(spill):
        out[spill] *= _SHRINK
        spill = np.abs(out) > lam
    return out


def project_dual(w: DualState, lam: float) -> DualState:
    """Radial projection of every entry onto the disk ``|w_i| <= lam``."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return DualState(_clamp(w.w_h, lam), _clamp(w.w_v, lam))


def dual_gradient(psi_o: ComplexField, w: DualState) -> DualState:
    """Wirtinger gradient of ``G(w) = ||psi_o - D^H w||^2``: ``-D(psi_o - D^H w)``."""
    g_h, g_v = _forward_diff(psi_o - _adjoint_diff(w.w_h, w.w_v))
    return DualState(-g_h, -g_v)


def prox_objective(o: ComplexField, psi_o: ComplexField, lam: float) -> float:
    """Primal prox objective ``1/2 ||O - psi_o||^2 + lam * TV(O)``."""
    return float(0.5 * np.sum(np.abs(o - psi_o) ** 2) + lam * tv_seminorm(o))


def tv_prox_dual(
    psi_o: ComplexField, cfg: TVProxConfig, w0: DualState | None = None
) -> tuple[ComplexField, DualState]:
    """Run the accelerated dual gradient projection; return (O, final w).

    *w0* warm-starts the dual; ``None`` starts from zero.
    """
    lam = cfg.lam
    if w0 is None:
        w_h = np.zeros_like(psi_o, dtype=np.complex128)
        w_v = np.zeros_like(psi_o, dtype=np.complex128)
    else:
        w_h = _clamp(w0.w_h, lam)
        w_v = _clamp(w0.w_v, lam)
    z_h, z_v = w_h, w_v
    eta = cfg.eta
    for t in range(1, cfg.sub_iters + 1):
        # Step along D(psi - D^H z), the negative gradient.
        r_h, r_v = _forward_diff(psi_o - _adjoint_diff(z_h, z_v))
        new_h = _clamp(z_h + eta * r_h, lam)
        new_v = _clamp(z_v + eta * r_v, lam)
        eps = t / (t + 3.0)
        z_h = new_h + eps * (new_h - w_h)
        z_v = new_v + eps * (new_v - w_v)
        w_h, w_v = new_h, new_v
    return psi_o - _adjoint_diff(w_h, w_v), DualState(w_h, w_v)


def tv_prox(psi_o: ComplexField, cfg: TVProxConfig) -> ComplexField:
    """Proximal operator of ``lam * TV`` at *psi_o* (cold-started dual)."""
    if cfg.lam == 0.0:
        return np.array(psi_o, dtype=np.complex128)
    return tv_prox_dual(psi_o, cfg)[0]
