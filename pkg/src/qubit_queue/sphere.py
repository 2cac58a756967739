"""n-qubit states on the unit sphere.

A state of ``n`` qubits is a length ``2**n`` complex amplitude vector.  It is
parameterized by ``2**n`` angles: the first ``2**n - 1`` are polar angles and
the last one is the phase of the final amplitude::

    psi_1 = cos(t_1)
    psi_k = sin(t_1) ... sin(t_{k-1}) cos(t_k)          2 <= k < 2**n
    psi_N = exp(i t_N) sin(t_1) ... sin(t_{N-1})         N = 2**n

Arithmetic on states is defined in angle space (``op_combine``).  The direct
coefficient formulas in ``coeff_map`` compute the same states from the
amplitudes and serve as an independent cross-check.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import (
    DegenerateWarning,
    DimensionMismatch,
    DivisionByZeroAmplitude,
    DomainError,
    ParseError,
    SingularDenominator,
    ZeroVector,
)

NORM_TOL = 1e-12
CROSS_TOL = 1e-9
SINGULAR_TOL = 1e-6
DEGENERATE_TOL = 1e-12
ZERO_NORM2 = 1e-24


class OpKind(enum.Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"


def _check_n(n: int, length: int, what: str) -> None:
    if n < 1:
        raise DomainError(f"qubit count must be >= 1, got {n}")
    if length != 2**n:
        raise DimensionMismatch(f"{what}: expected {2**n} entries for n={n}, got {length}")


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QubitState:
    """Unit-norm amplitude vector, indexed by ``reindex`` of the bit string."""

    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes, complex)
        _check_n(self.n, amps.size, "QubitState")
        if not np.all(np.isfinite(amps)):
            raise DomainError("amplitudes must be finite")
        err = abs(float(np.sum(np.abs(amps) ** 2)) - 1.0)
        if err > NORM_TOL:
            raise DomainError(f"state is not unit norm (|norm^2 - 1| = {err:.3e})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def _trusted(cls, n: int, amplitudes) -> "QubitState":
        # Skips the norm check; used for results whose accuracy is bounded
        # by CROSS_TOL rather than NORM_TOL.
        obj = object.__new__(cls)
        amps = _frozen(amplitudes, complex)
        _check_n(n, amps.size, "QubitState")
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "amplitudes", amps)
        return obj

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "QubitState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(_n_for(amps.size), amps)

    def __len__(self):
        return self.amplitudes.size


@dataclass(frozen=True, eq=False)
class SphericalAngles:
    n: int
    theta: np.ndarray

    def __post_init__(self):
        theta = _frozen(self.theta, float)
        _check_n(self.n, theta.size, "SphericalAngles")
        if not np.all(np.isfinite(theta)):
            raise DomainError("angles must be finite")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def of(cls, theta) -> "SphericalAngles":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return cls(_n_for(theta.size), theta)


@dataclass(frozen=True, eq=False)
class RawAmplitudes:
    """Amplitude vector without the unit-norm constraint."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values, complex)
        _check_n(self.n, vals.size, "RawAmplitudes")
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values) -> "RawAmplitudes":
        vals = np.asarray(values, dtype=complex).reshape(-1)
        return cls(_n_for(vals.size), vals)


AmplitudeLike = Union[QubitState, RawAmplitudes, Sequence[complex], np.ndarray]


def _n_for(size: int) -> int:
    n = int(size).bit_length() - 1
    if size < 2 or 2**n != size:
        raise DimensionMismatch(f"length {size} is not a power of two >= 2")
    return n


def _values(x: AmplitudeLike) -> np.ndarray:
    if isinstance(x, QubitState):
        return x.amplitudes
    if isinstance(x, RawAmplitudes):
        return x.values
    return np.asarray(x, dtype=complex).reshape(-1)


def reindex(bits: Sequence[int]) -> int:
    """Map the bit string ``(j_1, ..., j_n)`` to ``h = sum_l 2**(l-1) j_l``.

    ``j_1`` is the least significant bit.  The amplitude of the string is
    stored at 0-based position ``h``.
    """
    bits = list(bits)
    if not bits:
        raise DomainError("bit string must have at least one bit")
    h = 0
    for power, b in enumerate(bits):
        if b not in (0, 1):
            raise DomainError(f"bit {power + 1} is {b!r}, expected 0 or 1")
        h += b << power
    return h


def bits_of(h: int, n: int) -> tuple[int, ...]:
    """Inverse of :func:`reindex`."""
    if not 0 <= h < 2**n:
        raise DomainError(f"index {h} out of range for n={n}")
    return tuple((h >> l) & 1 for l in range(n))


def amplitudes_from_angles(theta) -> np.ndarray:
    """Vectorized angle-to-amplitude map over the last axis."""
    theta = np.asarray(theta, dtype=float)
    sines = np.sin(theta[..., :-1])
    prefix = np.ones(theta.shape, dtype=float)
    prefix[..., 1:] = np.cumprod(sines, axis=-1)
    out = prefix.astype(complex)
    out[..., :-1] *= np.cos(theta[..., :-1])
    out[..., -1] *= np.exp(1j * theta[..., -1])
    return out


def from_angles(angles: SphericalAngles) -> QubitState:
    return QubitState(angles.n, amplitudes_from_angles(angles.theta))


def to_angles(state: QubitState) -> SphericalAngles:
    """Invert :func:`from_angles` on its image.

    The polar angles are computed as ``atan2(tail_norm, psi_k)``, which equals
    the sequential ``arccos(psi_k / prod sin)`` but keeps full precision near
    0 and pi/2.  When the remaining norm drops below ``DEGENERATE_TOL`` the
    trailing angles (and the phase) are set to 0 and a ``DegenerateWarning``
    is issued.
    """
    psi = state.amplitudes
    body = psi[:-1]
    bad_imag = np.flatnonzero(np.abs(body.imag) > NORM_TOL)
    if bad_imag.size:
        raise DomainError(f"amplitude {bad_imag[0]} has a nonzero imaginary part")
    bad_sign = np.flatnonzero(body.real < -NORM_TOL)
    if bad_sign.size:
        raise DomainError(f"amplitude {bad_sign[0]} is negative")
    real = np.maximum(body.real, 0.0)

    mag2 = np.abs(psi) ** 2
    tail2 = np.cumsum(mag2[::-1])[::-1]  # tail2[k] = sum_{i >= k} |psi_i|^2
    N = psi.size
    theta = np.zeros(N)
    for k in range(N - 1):
        if math.sqrt(tail2[k]) < DEGENERATE_TOL:
            warnings.warn(
                f"prefix sine product vanished at angle {k + 1}; trailing angles set to 0",
                DegenerateWarning,
                stacklevel=2,
            )
            return SphericalAngles(state.n, theta)
        theta[k] = math.atan2(math.sqrt(tail2[k + 1]), real[k])
    if abs(psi[-1]) < DEGENERATE_TOL:
        warnings.warn("last amplitude vanished; phase set to 0", DegenerateWarning, stacklevel=2)
    else:
        theta[-1] = float(np.angle(psi[-1])) % (2 * math.pi)
    return SphericalAngles(state.n, theta)


def norm_squared(raw: AmplitudeLike) -> float:
    return float(np.sum(np.abs(_values(raw)) ** 2))


def normalize(raw: AmplitudeLike) -> tuple[QubitState, float]:
    vals = _values(raw)
    nsq = norm_squared(vals)
    if nsq <= ZERO_NORM2:
        raise ZeroVector("cannot normalize a zero vector")
    const = math.sqrt(nsq)
    return QubitState(_n_for(vals.size), vals / const), const


def sum_norm(a: AmplitudeLike, b: AmplitudeLike) -> float:
    """Norm of ``a + b`` from the parts: ``|a|^2 + |b|^2 + 2 Re<a, b>``."""
    va, vb = _values(a), _values(b)
    if va.size != vb.size:
        raise DimensionMismatch("vectors differ in length")
    cross = float(np.vdot(va, vb).real)
    return math.sqrt(max(norm_squared(va) + norm_squared(vb) + 2.0 * cross, 0.0))


def _same_n(a, b) -> int:
    if a.n != b.n:
        raise DimensionMismatch(f"qubit counts differ: {a.n} vs {b.n}")
    return a.n


def op_combine(kind: OpKind, a: SphericalAngles, b: SphericalAngles) -> SphericalAngles:
    """Angle-space sum, difference, product or quotient of two states.

    Results are not folded back into the nominal domain.
    """
    n = _same_n(a, b)
    ta, tb = a.theta, b.theta
    if kind is OpKind.ADD:
        theta = (ta + tb) / 2
    elif kind is OpKind.SUB:
        theta = (ta - tb) / 2
    elif kind is OpKind.MUL:
        theta = ta + tb
    elif kind is OpKind.DIV:
        theta = ta - tb
    else:
        raise ValueError(f"unknown operation {kind!r}")
    return SphericalAngles(n, theta)


def elementwise_combine(kind: OpKind, phi: QubitState, psi: QubitState) -> RawAmplitudes:
    """Plain component-wise arithmetic; the result is generally off the sphere."""
    n = _same_n(phi, psi)
    x, y = phi.amplitudes, psi.amplitudes
    if kind is OpKind.ADD:
        out = x + y
    elif kind is OpKind.SUB:
        out = x - y
    elif kind is OpKind.MUL:
        out = x * y
    elif kind is OpKind.DIV:
        small = np.flatnonzero(np.abs(y) <= NORM_TOL)
        if small.size:
            raise DivisionByZeroAmplitude(int(small[0]))
        out = x / y
    else:
        raise ValueError(f"unknown operation {kind!r}")
    return RawAmplitudes(n, out)


def _guard(values, first_index: int, tol: float = SINGULAR_TOL) -> None:
    small = np.flatnonzero(np.abs(values) <= tol)
    if small.size:
        raise SingularDenominator(first_index + int(small[0]))


def coeff_map(
    kind: OpKind,
    phi: QubitState,
    psi: QubitState,
    angles_phi: SphericalAngles,
    angles_psi: SphericalAngles,
) -> QubitState:
    """Coefficients of the combined state from the closed-form amplitude formulas.

    Each component is an amplitude term (built from ``phi``/``psi``) plus an
    angle-only correction, divided by a trigonometric normalizer.  Raises
    :class:`SingularDenominator` (with the offending amplitude index) when a
    normalizer falls below ``SINGULAR_TOL``; callers then use
    ``from_angles(op_combine(...))`` instead.
    """
    n = _same_n(phi, psi)
    if angles_phi.n != n or angles_psi.n != n:
        raise DimensionMismatch("angles do not match the states' qubit count")
    x, y = phi.amplitudes, psi.amplitudes
    a, b = angles_phi.theta, angles_psi.theta
    N = 2**n
    sa, sb, ca, cb = np.sin(a), np.sin(b), np.cos(a), np.cos(b)
    out = np.empty(N, dtype=complex)
    last = N - 1
    pa, pb = np.prod(sa[:last]), np.prod(sb[:last])
    phase_a, phase_b = np.exp(1j * a[last]), np.exp(1j * b[last])

    if kind is OpKind.ADD:
        half_diff = np.cos((a[:last] - b[:last]) / 2)
        _guard(half_diff, 0)
        for i in range(last):
            amp = x[i] + y[i]
            expanded = np.prod(sa[:i] + sb[:i]) * (ca[i] + cb[i])
            recon = np.prod(sa[:i]) * ca[i] + np.prod(sb[:i]) * cb[i]
            out[i] = (amp + expanded - recon) / (2.0 ** (i + 1) * np.prod(half_diff[: i + 1]))
        ph = np.exp(1j * (a[last] + b[last]))
        amp = x[last] + y[last]
        expanded = ph * np.prod(sa[:last] + sb[:last])
        recon = phase_a * pa + phase_b * pb
        out[last] = (amp + expanded - recon) / (
            2.0**last * np.exp(0.5j * (a[last] + b[last])) * np.prod(half_diff)
        )

    elif kind is OpKind.SUB:
        half_sum = np.cos((a[:last] + b[:last]) / 2)
        _guard(half_sum, 0)
        for i in range(last):
            amp = x[i] - y[i]
            expanded = np.prod(sa[:i] - sb[:i]) * (ca[i] + cb[i])
            recon = np.prod(sa[:i]) * ca[i] - np.prod(sb[:i]) * cb[i]
            out[i] = (amp + expanded - recon) / (2.0 ** (i + 1) * np.prod(half_sum[: i + 1]))
        ph = np.exp(1j * (a[last] - b[last]))
        amp = x[last] - y[last]
        expanded = ph * np.prod(sa[:last] - sb[:last])
        recon = phase_a * pa - phase_b * pb
        out[last] = (amp + expanded - recon) / (
            2.0**last * np.exp(0.5j * (a[last] - b[last])) * np.prod(half_sum)
        )

    elif kind is OpKind.MUL:
        _guard(sa[:last], 0)
        s_plus, s_minus = np.sin(a + b), np.sin(a - b)
        c_plus, c_minus = np.cos(a + b), np.cos(a - b)
        for i in range(last):
            amp = 2.0 ** (i + 1) * np.prod(ca[:i]) * x[i] * y[i] / np.prod(sa[:i])
            expanded = np.prod(s_plus[:i] - s_minus[:i]) * (c_minus[i] + c_plus[i])
            target = np.prod(s_plus[:i]) * c_plus[i]
            out[i] = amp - (expanded - target)
        amp = 2.0**last * np.prod(ca[:last]) * x[last] * y[last] / pa
        ph = np.exp(1j * (a[last] + b[last]))
        out[last] = amp - ph * (np.prod(s_plus[:last] - s_minus[:last]) - np.prod(s_plus[:last]))

    elif kind is OpKind.DIV:
        _guard(sa[:last], 0)
        # psi_k is a product of sines and one cosine; each factor is guarded
        # rather than the (possibly tiny but exact) product itself
        _guard(sb[:last], 1)
        _guard(cb[:last], 0)
        zero = np.flatnonzero(y == 0)
        if zero.size:
            raise SingularDenominator(int(zero[0]))
        s_plus, s_minus = np.sin(a + b), np.sin(a - b)
        c_plus, c_minus = np.cos(a + b), np.cos(a - b)
        for i in range(last):
            sign = -1.0 if i % 2 else 1.0
            amp = (
                sign
                * 2.0 ** (i + 1)
                * np.prod(ca[:i])
                * (x[i] / y[i])
                * np.prod(sb[:i] ** 2)
                * cb[i] ** 2
                / np.prod(sa[:i])
            )
            expanded = np.prod(-(s_plus[:i] - s_minus[:i])) * (c_minus[i] + c_plus[i])
            target = np.prod(s_minus[:i]) * c_minus[i]
            out[i] = amp - (expanded - target)
        amp = (-2.0) ** last * np.prod(ca[:last]) * (x[last] / y[last]) * np.prod(sb[:last] ** 2) / pa
        ph = np.exp(1j * (a[last] - b[last]))
        out[last] = amp - ph * (
            np.prod(-(s_plus[:last] - s_minus[:last])) - np.prod(s_minus[:last])
        )
    else:
        raise ValueError(f"unknown operation {kind!r}")

    return QubitState._trusted(n, out)


def combine(kind: OpKind, phi: QubitState, psi: QubitState) -> QubitState:
    """Combined state on the sphere, via the angle-space rule."""
    return from_angles(op_combine(kind, to_angles(phi), to_angles(psi)))


def channel_gain(phi: QubitState, psi: QubitState, method: str = "inner") -> complex:
    """Measurement-channel gain ``G`` with ``|psi> ~ |phi> G``.

    ``H(phi) H(phi)^dagger`` is a rank-one outer product, so its inverse is
    taken in the Moore-Penrose sense.  For unit-norm ``phi`` this collapses to
    the inner product ``<phi|psi>`` (``method="inner"``, the default);
    ``method="pinv"`` evaluates the matrix expression literally.
    """
    _same_n(phi, psi)
    x, y = phi.amplitudes, psi.amplitudes
    if method == "inner":
        return complex(np.vdot(x, y))
    if method == "pinv":
        col = x.reshape(-1, 1)
        outer = col @ col.conj().T
        return complex((col.conj().T @ np.linalg.pinv(outer) @ y.reshape(-1, 1))[0, 0])
    raise ValueError(f"unknown method {method!r}")


def apply_channel(phi: QubitState, psi: QubitState) -> RawAmplitudes:
    """``|phi> G(phi, psi)``: the component of ``psi`` along ``phi``."""
    g = channel_gain(phi, psi)
    return RawAmplitudes(phi.n, phi.amplitudes * g)


# plain-text fixtures: "n=<int>" then 2**n lines of "re im"


def format_state(values: AmplitudeLike) -> str:
    vals = _values(values)
    n = _n_for(vals.size)
    lines = [f"n={n}"]
    lines += [f"{z.real:.17g} {z.imag:.17g}" for z in vals]
    return "\n".join(lines) + "\n"


def parse_state(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("n="):
        raise ParseError("first line must be 'n=<int>'", line=1)
    try:
        n = int(lines[0][2:])
    except ValueError:
        raise ParseError("bad qubit count", line=1) from None
    if n < 1:
        raise ParseError("qubit count must be >= 1", line=1)
    body = lines[1:]
    if len(body) != 2**n:
        raise ParseError(f"expected {2**n} amplitude lines, found {len(body)}", line=len(lines))
    vals = np.empty(2**n, dtype=complex)
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != 2:
            raise ParseError("expected 're im'", line=i + 2)
        try:
            vals[i] = complex(float(parts[0]), float(parts[1]))
        except ValueError:
            raise ParseError("non-numeric amplitude", line=i + 2) from None
    return vals


def write_state(path, values: AmplitudeLike) -> None:
    Path(path).write_text(format_state(values))


def read_state(path) -> np.ndarray:
    return parse_state(Path(path).read_text())
