"""I/Q recording -> fixed-size normalized spectrograms.

Pipeline: cut into thirds-of-a-slice sub-slices, drop the ones whose mean
power sits below the noise threshold, re-cut the survivors into whole slices,
then per slice: windowed STFT -> dB power -> min-max normalization to [0,1].
"""

from __future__ import annotations

import numpy as np

from .signals import IQRecording

DB_FLOOR_EPS = 1e-12

_WINDOWS = {
    "hann": np.hanning,
    "hamming": np.hamming,
    "rectangular": np.ones,
}

SCALE_LINEAR = "linear"
SCALE_DB = "db"
SCALE_NORMALIZED = "normalized"


class STFTConfig:
    """Windowed-DFT parameters and the expected output grid.

    Two-sided output keeps all fft_length bins (complex input carries
    negative frequencies); one-sided keeps the first fft_length//2 bins.
    """

    def __init__(self, window_length, hop, fft_length, window_function="hann",
                 sided="two", output_grid=None):
        if not (0 < hop <= window_length <= fft_length):
            raise ValueError(
                f"need 0 < hop ({hop}) <= window_length ({window_length})"
                f" <= fft_length ({fft_length})")
        if window_function not in _WINDOWS:
            raise ValueError(f"unknown window_function {window_function!r}")
        if sided not in ("one", "two"):
            raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
        self.window_length = int(window_length)
        self.hop = int(hop)
        self.fft_length = int(fft_length)
        self.window_function = window_function
        self.sided = sided
        self.output_grid = None if output_grid is None else (int(output_grid[0]),
                                                             int(output_grid[1]))
        if self.output_grid is not None and self.output_grid[1] != self.frequency_bins:
            raise ValueError(
                f"output_grid bins {self.output_grid[1]} != {self.frequency_bins} "
                f"({self.sided}-sided fft_length {self.fft_length})")

    @property
    def frequency_bins(self) -> int:
        return self.fft_length if self.sided == "two" else self.fft_length // 2

    def frames_for(self, n_samples: int) -> int:
        return (n_samples - self.window_length) // self.hop + 1

    def window(self) -> np.ndarray:
        return _WINDOWS[self.window_function](self.window_length)


class Slice:
    """Fixed-length complex segment plus the sub-slice indices it came from."""

    def __init__(self, samples, origin=None):
        self.samples = np.asarray(samples, dtype=np.complex128)
        self.origin = origin

    def __len__(self):
        return len(self.samples)


class Spectrogram:
    """Real time-frequency matrix, shape (time_frames, frequency_bins)."""

    def __init__(self, values, scale, label=None, degenerate=False):
        self.values = np.asarray(values, dtype=np.float64)
        if scale not in (SCALE_LINEAR, SCALE_DB, SCALE_NORMALIZED):
            raise ValueError(f"unknown scale {scale!r}")
        self.scale = scale
        self.label = None if label is None else int(label)
        self.degenerate = bool(degenerate)

    @property
    def shape(self):
        return self.values.shape


def resolve_threshold(sub_powers: np.ndarray, noise_threshold) -> float:
    """Threshold policy: None -> median x 2.0, ('median', f) -> median x f,
    a number -> absolute threshold."""
    if noise_threshold is None:
        return float(np.median(sub_powers)) * 2.0
    if isinstance(noise_threshold, tuple):
        kind, factor = noise_threshold
        if kind != "median":
            raise ValueError(f"unknown threshold policy {kind!r}")
        return float(np.median(sub_powers)) * float(factor)
    return float(noise_threshold)


def slice_and_denoise(recording: IQRecording, target_length: int,
                      noise_threshold=None, denoise: bool = True) -> list[Slice]:
    """Cut into slices of target_length after dropping weak sub-slices.

    Sub-slices are target_length // 3 long; survivors keep their original
    order and are re-cut into whole slices, trailing remainder discarded.
    Returns [] when everything falls below the threshold.
    """
    if len(recording) < target_length:
        raise ValueError(
            f"recording length {len(recording)} < target_length {target_length}")
    x = recording.samples
    sub_len = target_length // 3
    n_subs = len(x) // sub_len
    subs = x[: n_subs * sub_len].reshape(n_subs, sub_len)

    if denoise:
        powers = np.mean(np.abs(subs) ** 2, axis=1)
        thr = resolve_threshold(powers, noise_threshold)
        keep = np.flatnonzero(powers >= thr)
    else:
        keep = np.arange(n_subs)
    if keep.size == 0:
        return []

    kept = subs[keep].reshape(-1)
    n_slices = len(kept) // target_length
    out = []
    for i in range(n_slices):
        seg = kept[i * target_length: (i + 1) * target_length]
        # sub-slice indices covered by this slice, for provenance
        lo = (i * target_length) // sub_len
        hi = min(len(keep), -(-((i + 1) * target_length) // sub_len))
        out.append(Slice(seg, origin=(recording.label, tuple(int(j) for j in keep[lo:hi]))))
    return out


def stft(sl: Slice, cfg: STFTConfig) -> np.ndarray:
    """Complex STFT matrix X[n, q], frame n at sample n*hop.

    X[n, q] = sum_m x[n*hop + m] * w[m] * exp(-2j*pi*q*m / fft_length),
    computed over m = 0..window_length-1 with zero padding to fft_length.
    """
    x = np.asarray(sl.samples if isinstance(sl, Slice) else sl, dtype=np.complex128)
    n_frames = cfg.frames_for(len(x))
    if n_frames < 1:
        raise ValueError(f"slice of {len(x)} samples too short for window "
                         f"{cfg.window_length}")
    if cfg.output_grid is not None and n_frames != cfg.output_grid[0]:
        raise ValueError(
            f"slice of {len(x)} samples yields {n_frames} frames, "
            f"config expects {cfg.output_grid[0]}")
    idx = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.window_length)[None, :]
    segments = x[idx] * cfg.window()[None, :]
    X = np.fft.fft(segments, n=cfg.fft_length, axis=1)
    if cfg.sided == "one":
        X = X[:, : cfg.fft_length // 2]
    return X


def power_db(X: np.ndarray, floor_eps: float = DB_FLOOR_EPS) -> np.ndarray:
    """Entry-wise 20*log10(|X| + floor_eps); the floor keeps zeros finite."""
    return 20.0 * np.log10(np.abs(X) + floor_eps)


def normalize(db: np.ndarray, label=None) -> Spectrogram:
    """Min-max normalize to [0, 1]; a flat matrix maps to zeros with a flag."""
    db = np.asarray(db, dtype=np.float64)
    lo = db.min()
    hi = db.max()
    if hi == lo:
        return Spectrogram(np.zeros_like(db), SCALE_NORMALIZED, label=label,
                           degenerate=True)
    return Spectrogram((db - lo) / (hi - lo), SCALE_NORMALIZED, label=label)


class PreprocessConfig:
    """Slice length, STFT grid, and denoising policy for the full pipeline."""

    def __init__(self, slice_samples=4096, stft: STFTConfig | None = None,
                 threshold_factor=2.0, denoise=True, floor_eps=DB_FLOOR_EPS):
        self.slice_samples = int(slice_samples)
        self.stft = stft if stft is not None else STFTConfig(64, 64, 64)
        self.threshold_factor = float(threshold_factor)
        self.denoise = bool(denoise)
        self.floor_eps = float(floor_eps)

    @property
    def grid(self):
        g = self.stft.output_grid
        if g is not None:
            return g
        return (self.stft.frames_for(self.slice_samples), self.stft.frequency_bins)


def preprocess_pipeline(recording: IQRecording, cfg: PreprocessConfig) -> list[Spectrogram]:
    """slice_and_denoise -> stft -> power_db -> normalize, deterministic."""
    slices = slice_and_denoise(
        recording, cfg.slice_samples,
        noise_threshold=("median", cfg.threshold_factor),
        denoise=cfg.denoise)
    out = []
    for sl in slices:
        spec = normalize(power_db(stft(sl, cfg.stft), cfg.floor_eps),
                         label=recording.label)
        out.append(spec)
    return out
