"""Synthetic UAV-like I/Q burst signals and the air-to-ground channel.

A signal is built from two burst families: wide periodic video-transmission
bursts (high duty, wide bandwidth) and narrow control bursts (short, sparse).
Both are band-limited Gaussian noise shaped by a raised-cosine spectral mask
and shifted to a hopping center offset, which is enough structure for the
downstream spectrogram pipeline without modeling a real modem.

The channel applies distance attenuation, a slowly varying wobble phase, and
additive complex Gaussian noise:

    r = sqrt(PL(d)) * exp(-j*2*pi*dd/lambda) * s + eta
"""

from __future__ import annotations

import numpy as np

WOBBLE_BLOCK = 1024  # samples per wobble-phase redraw

PATH_LOSS_MODELS = ("free-space", "log-distance")
WOBBLE_DISTRIBUTIONS = ("uniform", "gaussian")


def derive_seed(seed: int, *parts) -> int:
    """Deterministic child seed from a root seed and context labels."""
    ints = [seed] + [p if isinstance(p, int) else abs(hash(p)) % (2**32) for p in parts]
    return int(np.random.SeedSequence(ints).generate_state(1, np.uint64)[0])


class SignalProfile:
    """Per-class burst-pattern description.

    hop_set offsets are baseband center frequencies in Hz; every offset must
    leave the full vts_bandwidth inside the sampled band.
    """

    def __init__(self, class_id, vts_bandwidth, vts_duty_cycle, vts_period,
                 control_burst_width, control_burst_rate, hop_set, hop_dwell,
                 amplitude=1.0):
        self.class_id = int(class_id)
        self.vts_bandwidth = float(vts_bandwidth)
        self.vts_duty_cycle = float(vts_duty_cycle)
        self.vts_period = float(vts_period)
        self.control_burst_width = float(control_burst_width)
        self.control_burst_rate = float(control_burst_rate)
        self.hop_set = [float(h) for h in hop_set]
        self.hop_dwell = float(hop_dwell)
        self.amplitude = float(amplitude)
        self._check()

    def _check(self):
        if not 0.0 < self.vts_duty_cycle <= 1.0:
            raise ValueError(f"vts_duty_cycle must be in (0, 1], got {self.vts_duty_cycle}")
        for name in ("vts_bandwidth", "vts_period", "control_burst_width",
                     "control_burst_rate", "hop_dwell", "amplitude"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.hop_set:
            raise ValueError("hop_set must be non-empty")

    def validate_for_rate(self, sample_rate: float):
        """Reject hop offsets that push the burst band outside +-sample_rate/2."""
        limit = sample_rate / 2.0 - self.vts_bandwidth / 2.0
        for off in self.hop_set:
            if abs(off) > limit:
                raise ValueError(
                    f"hop offset {off:g} Hz outside +-{limit:g} Hz for "
                    f"bandwidth {self.vts_bandwidth:g} at rate {sample_rate:g}")


class ChannelParams:
    """Air-to-ground channel: path loss, wobble phase, and AWGN."""

    def __init__(self, distance_d, wavelength_lambda, path_loss_model="free-space",
                 path_loss_exponent=2.0, wobble_distribution="uniform",
                 wobble_scale=None, wobble_offset=0.0, noise_variance_sigma2=0.0):
        if distance_d <= 0:
            raise ValueError("distance_d must be > 0")
        if wavelength_lambda <= 0:
            raise ValueError("wavelength_lambda must be > 0")
        if noise_variance_sigma2 < 0:
            raise ValueError("noise_variance_sigma2 must be >= 0")
        if path_loss_model not in PATH_LOSS_MODELS:
            raise ValueError(f"unknown path_loss_model {path_loss_model!r}")
        if wobble_distribution not in WOBBLE_DISTRIBUTIONS:
            raise ValueError(f"unknown wobble_distribution {wobble_distribution!r}")
        self.distance_d = float(distance_d)
        self.wavelength_lambda = float(wavelength_lambda)
        self.path_loss_model = path_loss_model
        self.path_loss_exponent = float(path_loss_exponent)
        self.wobble_distribution = wobble_distribution
        # default wobble span: one full wavelength (full phase circle)
        self.wobble_scale = float(wavelength_lambda if wobble_scale is None else wobble_scale)
        self.wobble_offset = float(wobble_offset)
        self.noise_variance_sigma2 = float(noise_variance_sigma2)

    def path_loss(self) -> float:
        """Linear power attenuation PL(d)."""
        lam, d = self.wavelength_lambda, self.distance_d
        if self.path_loss_model == "free-space":
            return (lam / (4.0 * np.pi * d)) ** 2
        # log-distance with 1 m reference, free-space at the reference
        pl0 = (lam / (4.0 * np.pi)) ** 2
        return pl0 * d ** (-self.path_loss_exponent)


class IQRecording:
    """Complex baseband sample stream with rate/frequency/label metadata."""

    def __init__(self, samples, sample_rate, center_frequency=0.0, label=None,
                 source="synthetic"):
        samples = np.asarray(samples, dtype=np.complex128)
        if samples.size == 0:
            raise ValueError("samples must be non-empty")
        if sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if source not in ("synthetic", "file"):
            raise ValueError(f"unknown source {source!r}")
        self.samples = samples
        self.sample_rate = float(sample_rate)
        self.center_frequency = float(center_frequency)
        self.label = None if label is None else int(label)
        self.source = source

    def __len__(self):
        return len(self.samples)


def _spectral_mask(n: int, sample_rate: float, bandwidth: float) -> np.ndarray:
    """Raised-cosine-edged lowpass mask over FFT bin frequencies."""
    f = np.fft.fftfreq(n, d=1.0 / sample_rate)
    half = bandwidth / 2.0
    flat = 0.8 * half
    mask = np.zeros(n)
    mask[np.abs(f) <= flat] = 1.0
    edge = (np.abs(f) > flat) & (np.abs(f) <= half)
    mask[edge] = 0.5 * (1.0 + np.cos(np.pi * (np.abs(f[edge]) - flat) / (half - flat)))
    return mask


def _band_limited_noise(n: int, sample_rate: float, bandwidth: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Unit-power complex Gaussian noise confined to the given bandwidth."""
    white = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if n < 8:
        return white / np.sqrt(np.mean(np.abs(white) ** 2))
    shaped = np.fft.ifft(np.fft.fft(white) * _spectral_mask(n, sample_rate, bandwidth))
    power = np.mean(np.abs(shaped) ** 2)
    if power <= 0:
        raise ValueError("bandwidth too narrow for the requested length")
    return shaped / np.sqrt(power)


def vts_envelope(profile: SignalProfile, duration: float, sample_rate: float) -> np.ndarray:
    """0/1 on-off envelope of the periodic wide bursts."""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    phase = np.mod(t, profile.vts_period)
    return (phase < profile.vts_duty_cycle * profile.vts_period).astype(np.float64)


def synthesize_clean(profile: SignalProfile, duration: float, sample_rate: float,
                     seed: int) -> IQRecording:
    """Emit the labeled clean baseband signal for one profile.

    Deterministic for a fixed seed. Wide bursts follow the duty/period/hop
    pattern; control bursts fire at control_burst_rate with width
    control_burst_width, hopping one step ahead of the wide-burst pattern.
    """
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration * sample_rate must be >= 1")
    profile.validate_for_rate(sample_rate)
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sample_rate

    hop_idx = np.floor(t / profile.hop_dwell).astype(np.int64) % len(profile.hop_set)
    offsets = np.asarray(profile.hop_set)[hop_idx]

    vts = _band_limited_noise(n, sample_rate, profile.vts_bandwidth, rng)
    vts = vts * vts_envelope(profile, duration, sample_rate)
    vts = vts * np.exp(2j * np.pi * offsets * t)

    ctrl = np.zeros(n, dtype=np.complex128)
    width_n = max(1, int(round(profile.control_burst_width * sample_rate)))
    spacing = 1.0 / profile.control_burst_rate
    ctrl_bw = min(2.0 / profile.control_burst_width, profile.vts_bandwidth)
    k = 0
    while True:
        s0 = int(round(k * spacing * sample_rate))
        if s0 >= n:
            break
        s1 = min(n, s0 + width_n)
        burst = _band_limited_noise(s1 - s0, sample_rate, ctrl_bw, rng)
        off = profile.hop_set[(k + 1) % len(profile.hop_set)]
        ctrl[s0:s1] = burst * np.exp(2j * np.pi * off * t[s0:s1])
        k += 1

    samples = profile.amplitude * (vts + 0.8 * ctrl)
    return IQRecording(samples, sample_rate, label=profile.class_id, source="synthetic")


def apply_channel(clean: IQRecording, channel: ChannelParams, seed: int) -> IQRecording:
    """Attenuate, wobble, and add noise; deterministic for a fixed seed.

    The wobble displacement is redrawn once per WOBBLE_BLOCK samples and the
    noise draw happens after all wobble draws, so a sigma^2=0 run with the
    same seed reproduces the noisy run's signal component exactly.
    """
    s = clean.samples
    rng = np.random.default_rng(seed)
    n = len(s)
    nblocks = -(-n // WOBBLE_BLOCK)
    if channel.wobble_distribution == "uniform":
        dd = rng.uniform(0.0, channel.wobble_scale, nblocks) if channel.wobble_scale > 0 \
            else np.zeros(nblocks)
    else:
        dd = rng.normal(0.0, channel.wobble_scale, nblocks) if channel.wobble_scale > 0 \
            else np.zeros(nblocks)
    dd = dd + channel.wobble_offset
    delta = np.repeat(dd, WOBBLE_BLOCK)[:n]

    out = np.sqrt(channel.path_loss()) * np.exp(-2j * np.pi * delta / channel.wavelength_lambda) * s
    if channel.noise_variance_sigma2 > 0:
        sig = np.sqrt(channel.noise_variance_sigma2 / 2.0)
        out = out + sig * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return IQRecording(out, clean.sample_rate, clean.center_frequency, clean.label,
                       clean.source)


def noise_variance_for_snr(clean: IQRecording, channel: ChannelParams,
                           snr_db: float) -> float:
    """sigma^2 that yields the target mean-power SNR after path loss."""
    signal_power = channel.path_loss() * float(np.mean(np.abs(clean.samples) ** 2))
    return signal_power / 10.0 ** (snr_db / 10.0)


def make_profile_family(n_classes: int, sample_rate: float,
                        separability: float = 1.0) -> list[SignalProfile]:
    """Build n controllably distinct profiles.

    separability scales the minimum pairwise spread of duty cycles and hop
    offsets; 1.0 is the default desk-scale spacing. Duty cycles stay below
    0.5 so the median-power denoising threshold always sits on the noise
    floor.
    """
    profiles = []
    duty_lo, duty_hi = 0.22, 0.46
    for i in range(n_classes):
        frac = i / max(1, n_classes - 1)
        duty = duty_lo + (duty_hi - duty_lo) * frac * min(1.0, separability)
        period = (1.6 + 0.5 * (i % 4)) * 1e-3
        bw = (0.08 + 0.025 * (i % 5)) * sample_rate
        n_hops = 1 + (i % 3)
        limit = sample_rate / 2.0 - bw / 2.0
        span = 0.75 * limit * min(1.0, separability)
        base = -span + 2 * span * ((i * 0.37 + 0.13) % 1.0)
        hop_set = [float(np.clip(base + j * span / max(1, n_hops), -limit, limit))
                   for j in range(n_hops)]
        profiles.append(SignalProfile(
            class_id=i,
            vts_bandwidth=bw,
            vts_duty_cycle=duty,
            vts_period=period,
            control_burst_width=(30 + 10 * (i % 3)) / sample_rate * 8,
            control_burst_rate=700.0 + 150.0 * (i % 5),
            hop_set=hop_set,
            hop_dwell=(0.9 + 0.2 * (i % 3)) * 1e-3,
            amplitude=1.0,
        ))
    return profiles
