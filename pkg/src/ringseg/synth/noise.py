"""Low-frequency 1/f^lambda noise and its use to perturb kinematics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..trace import ArmState, ExecutionTrace, Frame, kinematic_matrix


@dataclass(frozen=True)
class NoiseConfig:
    """Spectrum S(f) = beta / f**lam (one-sided, units^2/Hz).

    Below ``f_min`` the spectrum is held flat at S(f_min); without that floor
    the lowest bins of a long trace would carry unbounded power. The variance
    of a unit series is then about 1.15 * beta * f_min**(1 - lam), so with the
    defaults beta = 0.09 gives a position drift of roughly 3 mm (std).
    The ``*_unit`` fields map one unit of noise onto each kinematic quantity.
    """

    beta: float = 0.01
    lam: float = 7.5
    seed: int = 0
    f_min: float = 0.05  # Hz
    position_unit: float = 5e-7  # m
    quat_unit: float = 5e-7
    jaw_unit: float = 5e-6  # rad

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.f_min < 0:
            raise ValueError("f_min must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def noise_psd(freqs: np.ndarray, beta: float, lam: float, f_min: float = 0.0) -> np.ndarray:
    f = np.asarray(freqs, dtype=float)
    out = np.zeros_like(f)
    pos = f > 0
    out[pos] = beta / np.maximum(f[pos], f_min) ** lam
    return out


def synthesize_noise(
    length: int,
    sample_rate: float,
    cfg: NoiseConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Real series whose one-sided power spectral density is ``S(f)``.

    Each positive-frequency bin gets amplitude sqrt(S) (scaled to density
    units) and a uniform random phase; the DC bin is zero.
    """
    if length < 2:
        raise ValueError("noise length must be at least 2")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    freqs = np.fft.rfftfreq(length, d=1.0 / sample_rate)
    S = noise_psd(freqs, cfg.beta, cfg.lam, cfg.f_min)
    # periodogram density: P_k = 2|X_k|^2 / (fs N), undoubled at Nyquist
    power = S * sample_rate * length / 2.0
    if length % 2 == 0:
        power[-1] = S[-1] * sample_rate * length
    phase = rng.uniform(0.0, 2.0 * np.pi, size=freqs.size)
    if length % 2 == 0:
        phase[-1] = np.pi * (phase[-1] > np.pi)
    X = np.sqrt(power) * np.exp(1j * phase)
    X[0] = 0.0
    return np.fft.irfft(X, n=length)


def augment_with_noise(trace: ExecutionTrace, cfg: NoiseConfig) -> ExecutionTrace:
    """Add an independent noise realization to every position coordinate,
    quaternion component (then renormalized) and jaw angle.

    The scene stream and the annotations are carried over untouched.
    """
    rng = np.random.default_rng(cfg.seed)
    K = kinematic_matrix(trace)
    n = K.shape[0]
    units = np.array(
        ([cfg.position_unit] * 3 + [cfg.quat_unit] * 4 + [cfg.jaw_unit]) * 2
    )
    noise = np.column_stack(
        [synthesize_noise(n, trace.sample_rate, cfg, rng) for _ in range(K.shape[1])]
    )
    K = K + noise * units
    for block in (slice(3, 7), slice(11, 15)):
        K[:, block] /= np.linalg.norm(K[:, block], axis=1, keepdims=True)
    K[:, 7] = np.clip(K[:, 7], 0.0, np.pi)
    K[:, 15] = np.clip(K[:, 15], 0.0, np.pi)

    frames = []
    for row, fr in zip(K.tolist(), trace.frames):
        arms = (ArmState(row[0:3], row[3:7], row[7]), ArmState(row[8:11], row[11:15], row[15]))
        frames.append(Frame(fr.t, arms, fr.scene))
    meta = dict(trace.meta)
    meta.update(
        noise_beta=repr(cfg.beta),
        noise_lambda=repr(cfg.lam),
        noise_seed=str(cfg.seed),
        noise_f_min=repr(cfg.f_min),
    )
    return ExecutionTrace(trace.sample_rate, frames, trace.annotations, meta)
