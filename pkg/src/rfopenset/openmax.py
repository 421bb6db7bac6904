"""Extreme-value open-set calibration and scoring over activation vectors.

Calibration: collect correctly classified training logits per class, compute
the mean activation vector (MAV), and Weibull-fit the largest distances to
the MAV. Scoring: rank a test vector's logits, damp the top-alpha entries by
rank- and distance-dependent weights, route the lost mass into an explicit
unknown score, and softmax over everything.

Two weight modes for known classes at rank k (k = 1 is the top logit):

  evt-cdf        c = 1 - ((alpha-k)/alpha) * WeibullCDF(dist to MAV)
  paper-literal  c = 1 - ((alpha-k)/alpha) * exp(-(dist/location)^scale)

evt-cdf is the default: its decrement grows with distance from the class
center. The literal variant decays with distance instead and is kept for
side-by-side comparison.

When a simulated-unknown head index exists, that index is never
EVT-calibrated; its rank-k weight is 1 - (alpha-k)/alpha, and its softmax
mass is merged into the final unknown probability.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .weibull import WeibullFit, fit_tail

UNKNOWN = -1  # decision sentinel

DISTANCE_METRICS = ("euclidean", "cosine", "eucos")
WEIGHT_MODES = ("evt-cdf", "paper-literal")

CALIBRATION_VERSION = 1


class CalibrationConfig:
    def __init__(self, alpha=3, tail_size=20, distance_metric="euclidean",
                 weight_mode="evt-cdf", eucos_euclid_weight=1.0 / 200.0):
        if alpha < 1:
            raise ValueError("alpha must be >= 1")
        if distance_metric not in DISTANCE_METRICS:
            raise ValueError(f"unknown distance_metric {distance_metric!r}")
        if weight_mode not in WEIGHT_MODES:
            raise ValueError(f"unknown weight_mode {weight_mode!r}")
        self.alpha = int(alpha)
        self.tail_size = int(tail_size)
        self.distance_metric = distance_metric
        self.weight_mode = weight_mode
        self.eucos_euclid_weight = float(eucos_euclid_weight)


class ClassCalibration:
    """Per-class MAV plus fitted Weibull tail parameters."""

    def __init__(self, class_index, mav, fit: WeibullFit):
        self.class_index = int(class_index)
        self.mav = np.asarray(mav, dtype=np.float64)
        self.fit = fit


class OpenSetCalibration:
    """Everything needed to score: config, per-class models, head layout."""

    def __init__(self, config: CalibrationConfig, classes: dict[int, ClassCalibration],
                 n_logits: int, simulated_unknown_index=None):
        self.config = config
        self.classes = dict(classes)
        self.n_logits = int(n_logits)
        self.simulated_unknown_index = (None if simulated_unknown_index is None
                                        else int(simulated_unknown_index))

    @property
    def known_indices(self) -> list[int]:
        return sorted(self.classes)


class OpenSetPrediction:
    """Probabilities over known classes plus an explicit unknown entry."""

    def __init__(self, probabilities, decision, raw_unknown_score):
        self.probabilities = np.asarray(probabilities, dtype=np.float64)
        self.decision = int(decision)
        self.raw_unknown_score = float(raw_unknown_score)

    @property
    def unknown_probability(self) -> float:
        return float(self.probabilities[-1])


def distance(v: np.ndarray, mav: np.ndarray, cfg: CalibrationConfig) -> float:
    v = np.asarray(v, dtype=np.float64)
    mav = np.asarray(mav, dtype=np.float64)
    if cfg.distance_metric == "euclidean":
        return float(np.linalg.norm(v - mav))
    cos = 1.0 - float(np.dot(v, mav) /
                      (np.linalg.norm(v) * np.linalg.norm(mav) + 1e-300))
    if cfg.distance_metric == "cosine":
        return cos
    return cfg.eucos_euclid_weight * float(np.linalg.norm(v - mav)) + cos


def collect_avs(avs: np.ndarray, predictions: np.ndarray, labels: np.ndarray,
                class_indices) -> dict[int, np.ndarray]:
    """Group the correctly classified activation vectors by true class.

    Raises if any requested class ends up empty, naming the class.
    """
    avs = np.asarray(avs, dtype=np.float64)
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    out = {}
    empty = []
    for j in class_indices:
        mask = (labels == j) & (predictions == j)
        if not np.any(mask):
            empty.append(int(j))
        else:
            out[int(j)] = avs[mask]
    if empty:
        raise RuntimeError(
            f"no correctly classified training samples for class(es) {empty}; "
            "cannot calibrate")
    return out


def fit_class_models(per_class_avs: dict[int, np.ndarray],
                     cfg: CalibrationConfig) -> dict[int, ClassCalibration]:
    models = {}
    for j, rows in per_class_avs.items():
        mav = rows.mean(axis=0)
        dists = np.array([distance(r, mav, cfg) for r in rows])
        models[j] = ClassCalibration(j, mav, fit_tail(dists, min(cfg.tail_size,
                                                                 len(dists))))
    return models


def build_calibration(avs, predictions, labels, class_indices,
                      cfg: CalibrationConfig, n_logits: int,
                      simulated_unknown_index=None) -> OpenSetCalibration:
    per_class = collect_avs(avs, predictions, labels, class_indices)
    models = fit_class_models(per_class, cfg)
    return OpenSetCalibration(cfg, models, n_logits, simulated_unknown_index)


def _known_weight(d: float, cal: ClassCalibration, cfg: CalibrationConfig) -> float:
    if cfg.weight_mode == "evt-cdf":
        return float(cal.fit.cdf(d))
    # literal variant: location as divisor, scale as exponent
    if cal.fit.location <= 0.0:
        return 0.0
    return float(np.exp(-((d / cal.fit.location) ** cal.fit.scale)))


def correction_weights(v: np.ndarray, calibration: OpenSetCalibration) -> np.ndarray:
    """Per-logit multiplicative weights; only the top-alpha ranks move."""
    v = np.asarray(v, dtype=np.float64)
    cfg = calibration.config
    if cfg.alpha > v.size:
        raise ValueError(f"alpha {cfg.alpha} exceeds logit count {v.size}")
    if v.size != calibration.n_logits:
        raise ValueError(f"vector has {v.size} logits, calibration expects "
                         f"{calibration.n_logits}")
    order = np.argsort(v)[::-1]
    c = np.ones(v.size)
    for k in range(1, cfg.alpha + 1):
        idx = int(order[k - 1])
        factor = (cfg.alpha - k) / cfg.alpha
        if idx == calibration.simulated_unknown_index:
            c[idx] = 1.0 - factor
        elif idx in calibration.classes:
            cal = calibration.classes[idx]
            d = distance(v, cal.mav, cfg)
            c[idx] = 1.0 - factor * _known_weight(d, cal, cfg)
    return c


def recalibrate(v: np.ndarray, c: np.ndarray):
    """Element-wise damping plus the decrement-sum unknown score."""
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    v_tilde = v * c
    unknown_score = float(np.sum(v - v_tilde))
    return v_tilde, unknown_score


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max()
    e = np.exp(z)
    return e / e.sum()


def openmax_probability(v_tilde: np.ndarray, unknown_score: float,
                        calibration: OpenSetCalibration) -> OpenSetPrediction:
    """Softmax over recalibrated logits + the unknown score.

    With a simulated-unknown index, its mass and the decrement entry's mass
    are merged: both mean "not a known class".
    """
    scores = np.append(np.asarray(v_tilde, dtype=np.float64), unknown_score)
    p = _softmax(scores)
    simu = calibration.simulated_unknown_index
    if simu is None:
        probs = p
    else:
        known = [i for i in range(calibration.n_logits) if i != simu]
        probs = np.append(p[known], p[simu] + p[-1])
    decision_pos = int(np.argmax(probs))
    decision = UNKNOWN if decision_pos == probs.size - 1 else decision_pos
    return OpenSetPrediction(probs, decision, unknown_score)


def predict_open(avs: np.ndarray, calibration: OpenSetCalibration) -> list[OpenSetPrediction]:
    """Full scoring chain for a batch of activation vectors."""
    avs = np.atleast_2d(np.asarray(avs, dtype=np.float64))
    out = []
    for v in avs:
        c = correction_weights(v, calibration)
        v_tilde, unknown_score = recalibrate(v, c)
        out.append(openmax_probability(v_tilde, unknown_score, calibration))
    return out


# -- JSON persistence (17-significant-digit decimal, bit-exact round trip) --

def _fmt(x: float) -> float:
    return float(f"{float(x):.17g}")


def calibration_to_json(calibration: OpenSetCalibration) -> str:
    cfg = calibration.config
    doc = {
        "version": CALIBRATION_VERSION,
        "alpha": cfg.alpha,
        "tail_size": cfg.tail_size,
        "distance_metric": cfg.distance_metric,
        "weight_mode": cfg.weight_mode,
        "eucos_euclid_weight": _fmt(cfg.eucos_euclid_weight),
        "n_logits": calibration.n_logits,
        "simulated_unknown_index": calibration.simulated_unknown_index,
        "classes": [
            {
                "id": j,
                "mav": [_fmt(x) for x in calibration.classes[j].mav],
                "shape": _fmt(calibration.classes[j].fit.shape),
                "scale": _fmt(calibration.classes[j].fit.scale),
                "location": _fmt(calibration.classes[j].fit.location),
                "tail_size": calibration.classes[j].fit.tail_size,
                "tail_max": _fmt(calibration.classes[j].fit.tail_max),
            }
            for j in calibration.known_indices
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def calibration_from_json(text: str) -> OpenSetCalibration:
    doc = json.loads(text)
    if doc.get("version") != CALIBRATION_VERSION:
        raise ValueError(f"unsupported calibration version {doc.get('version')}")
    cfg = CalibrationConfig(doc["alpha"], doc["tail_size"], doc["distance_metric"],
                            doc["weight_mode"], doc["eucos_euclid_weight"])
    classes = {}
    for entry in doc["classes"]:
        fit = WeibullFit(entry["shape"], entry["scale"], entry["location"],
                         entry["tail_size"], entry["tail_max"])
        classes[int(entry["id"])] = ClassCalibration(entry["id"], entry["mav"], fit)
    return OpenSetCalibration(cfg, classes, doc["n_logits"],
                              doc["simulated_unknown_index"])


def save_calibration(path, calibration: OpenSetCalibration) -> Path:
    path = Path(path)
    path.write_text(calibration_to_json(calibration))
    return path


def load_calibration(path) -> OpenSetCalibration:
    return calibration_from_json(Path(path).read_text())
