"""Windowed time/frequency features for tri-axial sensor streams.

Each sensor's three axes are fused into a magnitude signal, cut into
fixed-length sliding windows, and summarised by 27 features:

==== ==========================================================
ID   Feature
==== ==========================================================
1    mean
2    standard deviation (population)
3    minimum
4    maximum
5    mode (centre of the fullest of 10 equal-width bins)
6    range
7    mean crossing rate
8    DC component (real-FFT bin 0 divided by N)
9-13 five largest spectral peak magnitudes, descending
14-18 frequencies (Hz) of those peaks
19   energy, mean of squared samples
20-23 mean, std, skewness, kurtosis of the normalised spectrum
24-27 mean, std, skewness, kurtosis of the samples
==== ==========================================================
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_matrix
from .exceptions import EmptyInput, InvalidInput, ParseError

N_FEATURES = 27
N_PEAKS = 5
MODE_BINS = 10

FEATURE_NAMES = (
    ["mean", "std", "min", "max", "mode", "range", "mean_crossing_rate", "dc"]
    + [f"peak_mag_{i}" for i in range(1, N_PEAKS + 1)]
    + [f"peak_freq_{i}" for i in range(1, N_PEAKS + 1)]
    + ["energy"]
    + ["spec_mean", "spec_std", "spec_skew", "spec_kurt"]
    + ["amp_mean", "amp_std", "amp_skew", "amp_kurt"]
)


@dataclass(frozen=True)
class SensorStream:
    """Raw tri-axial samples from one sensor.

    ``samples`` has shape (n, 3). ``label`` holds one integer per sample
    or is None.
    """

    samples: np.ndarray
    rate_hz: float
    label: np.ndarray | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise InvalidInput(f"samples must have shape (n, 3), got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInput("samples contain non-finite values")
        if not self.rate_hz > 0:
            raise InvalidInput(f"rate_hz must be positive, got {self.rate_hz}")
        object.__setattr__(self, "samples", samples)
        if self.label is not None:
            label = np.asarray(self.label, dtype=np.int64)
            if label.shape != (samples.shape[0],):
                raise InvalidInput("label must have one entry per sample")
            object.__setattr__(self, "label", label)


@dataclass(frozen=True)
class Window:
    values: np.ndarray
    rate_hz: float
    label: int | None = None
    start: int = field(default=0, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size < 2:
            raise InvalidInput("a window needs at least 2 samples")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("window contains non-finite values")
        if not self.rate_hz > 0:
            raise InvalidInput(f"rate_hz must be positive, got {self.rate_hz}")
        object.__setattr__(self, "values", values)


def magnitude(stream):
    """Euclidean norm of each (x, y, z) sample.

    Accepts a :class:`SensorStream` or anything convertible to an (n, 3)
    array.
    """
    samples = stream.samples if isinstance(stream, SensorStream) else np.asarray(stream, dtype=float)
    if samples.size == 0:
        raise EmptyInput("stream has no samples")
    samples = np.atleast_2d(samples)
    if samples.shape[1] != 3:
        raise InvalidInput(f"expected 3 axes, got {samples.shape[1]}")
    return np.sqrt(np.sum(samples * samples, axis=1))


def window_size(rate_hz, window_s):
    return int(round(window_s * rate_hz))


def window_stride(size, overlap):
    return max(1, int(np.floor(size * (1.0 - overlap))))


def _majority_label(labels):
    """Most common label, or None when the top count is shared."""
    values, counts = np.unique(labels, return_counts=True)
    top = counts.max()
    if np.count_nonzero(counts == top) > 1:
        return None
    return int(values[np.argmax(counts)])


def slide_windows(values, rate_hz, window_s=5.0, overlap=0.5, labels=None):
    """Cut a 1-D signal into fixed-length windows.

    Parameters
    ----------
    values : array-like of shape (n,)
        Signal samples.
    rate_hz : float
        Sampling rate.
    window_s : float, default=5.0
        Window length in seconds; the window holds
        ``round(window_s * rate_hz)`` samples.
    overlap : float in [0, 1), default=0.5
        Fraction of a window shared with the next one. The stride is
        ``floor(size * (1 - overlap))``, at least 1.
    labels : array-like of shape (n,), optional
        Per-sample labels. Each window gets the most common label, or None
        if that is tied.

    Returns
    -------
    list of Window
        Trailing samples that do not fill a whole window are dropped.
    """
    values = np.asarray(values, dtype=float).ravel()
    if not rate_hz > 0:
        raise InvalidInput(f"rate_hz must be positive, got {rate_hz}")
    if not 0.0 <= overlap < 1.0:
        raise InvalidInput(f"overlap must lie in [0, 1), got {overlap}")
    size = window_size(rate_hz, window_s)
    if size < 2:
        raise InvalidInput(f"window of {window_s}s at {rate_hz}Hz holds fewer than 2 samples")
    if values.size < size:
        raise EmptyInput(f"signal of {values.size} samples is shorter than one window ({size})")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64).ravel()
        if labels.shape != values.shape:
            raise InvalidInput("labels must match values in length")
    stride = window_stride(size, overlap)
    windows = []
    for start in range(0, values.size - size + 1, stride):
        label = None if labels is None else _majority_label(labels[start:start + size])
        windows.append(Window(values[start:start + size], rate_hz, label, start))
    return windows


def _weighted_moments(x, weights=None):
    """Mean, std, skewness and raw kurtosis of ``x`` under ``weights``.

    Population normalisation. When the spread is zero the skewness and
    kurtosis are reported as 0.
    """
    if weights is None:
        weights = np.full(x.shape, 1.0 / x.size)
    mean = float(np.dot(weights, x))
    dev = x - mean
    var = float(np.dot(weights, dev * dev))
    support = x[weights > 0]
    if support.size == 0 or np.ptp(support) == 0:
        return mean, 0.0, 0.0, 0.0
    std = np.sqrt(var)
    if std <= 1e-12 * max(1.0, abs(mean)):
        return mean, 0.0, 0.0, 0.0
    skew = float(np.dot(weights, dev ** 3)) / std ** 3
    kurt = float(np.dot(weights, dev ** 4)) / var ** 2
    return mean, std, skew, kurt


def _mode(v):
    lo, hi = v.min(), v.max()
    if lo == hi:
        return float(lo)
    counts, edges = np.histogram(v, bins=MODE_BINS, range=(lo, hi))
    k = int(np.argmax(counts))
    return float(0.5 * (edges[k] + edges[k + 1]))


def _spectral_peaks(mag, freqs):
    """Top peaks of a DC-free magnitude spectrum, zero padded to N_PEAKS."""
    peak_mags = np.zeros(N_PEAKS)
    peak_freqs = np.zeros(N_PEAKS)
    idx, _ = find_peaks(mag)
    if idx.size:
        order = np.argsort(-mag[idx], kind="stable")[:N_PEAKS]
        chosen = idx[order]
        peak_mags[: chosen.size] = mag[chosen]
        peak_freqs[: chosen.size] = freqs[chosen]
    return peak_mags, peak_freqs


def extract_features(window, rate_hz=None):
    """Compute the 27 window features in table order.

    Parameters
    ----------
    window : Window or array-like
        A :class:`Window`, or raw magnitude samples together with
        ``rate_hz``.
    rate_hz : float, optional
        Needed only when ``window`` is a plain array.

    Returns
    -------
    ndarray of shape (27,)
    """
    if not isinstance(window, Window):
        if rate_hz is None:
            raise InvalidInput("rate_hz is required for raw sample arrays")
        window = Window(window, rate_hz)
    v = window.values
    n = v.size

    amp_mean, amp_std, amp_skew, amp_kurt = _weighted_moments(v)
    vmin, vmax = float(v.min()), float(v.max())

    centred = v - amp_mean
    crossings = np.count_nonzero(centred[:-1] * centred[1:] < 0)
    mcr = crossings / (n - 1)

    spectrum = np.fft.rfft(v)
    dc = float(spectrum[0].real) / n
    mag = np.abs(spectrum[1:])
    # FFT rounding leaves ~1e-16 residue on flat signals
    mag[mag < 1e-12 * max(1.0, np.abs(spectrum).max())] = 0.0
    freqs = np.fft.rfftfreq(n, d=1.0 / window.rate_hz)[1:]
    peak_mags, peak_freqs = _spectral_peaks(mag, freqs)

    energy = float(np.mean(v * v))

    total = mag.sum()
    if total > 0:
        spec = _weighted_moments(freqs, mag / total)
    else:
        spec = (0.0, 0.0, 0.0, 0.0)

    out = np.empty(N_FEATURES)
    out[0:8] = [amp_mean, amp_std, vmin, vmax, _mode(v), vmax - vmin, mcr, dc]
    out[8:13] = peak_mags
    out[13:18] = peak_freqs
    out[18] = energy
    out[19:23] = spec
    out[23:27] = [amp_mean, amp_std, amp_skew, amp_kurt]
    return out


def sensor_features(streams, window_s=5.0, overlap=0.5):
    """Feature matrix for one or more sensors sharing a time base.

    Streams are aligned by row index and truncated to the shortest. The
    per-sensor 27-feature blocks are concatenated in the order given.

    Returns
    -------
    X : ndarray of shape (n_windows, 27 * n_sensors)
    y : ndarray of shape (n_windows,) or None
        Window labels from the first stream carrying labels. Windows whose
        label is tied are dropped from both ``X`` and ``y``.
    """
    if isinstance(streams, SensorStream):
        streams = [streams]
    if not streams:
        raise EmptyInput("no sensor streams given")
    rate = streams[0].rate_hz
    if any(s.rate_hz != rate for s in streams):
        raise InvalidInput("all streams must share a sampling rate")
    n = min(s.samples.shape[0] for s in streams)
    labels = next((s.label[:n] for s in streams if s.label is not None), None)

    blocks = []
    window_labels = None
    for s in streams:
        windows = slide_windows(magnitude(s)[:n], rate, window_s, overlap, labels)
        blocks.append(np.vstack([extract_features(w) for w in windows]))
        if window_labels is None and labels is not None:
            window_labels = [w.label for w in windows]
    X = np.hstack(blocks)
    if window_labels is None:
        return X, None
    keep = np.array([lab is not None for lab in window_labels])
    y = np.array([lab for lab in window_labels if lab is not None], dtype=np.int64)
    return X[keep], y


class WindowFeatureExtractor(BaseEstimator, TransformerMixin):
    """Transformer mapping rows of raw magnitude windows to 27 features.

    Stateless; ``fit`` only validates. Each input row is one window.

    Parameters
    ----------
    rate_hz : float, default=50.0
        Sampling rate of the window samples.
    """

    def __init__(self, rate_hz=50.0):
        self.rate_hz = rate_hz

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_matrix(X, "X")
        return np.vstack([extract_features(row, self.rate_hz) for row in X])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)


def _parse_label(cell):
    value = float(cell)
    if not value.is_integer():
        raise ValueError(f"label {cell!r} is not an integer")
    return int(value)


def load_sensor_csv(path, rate_hz):
    """Read a raw sensor CSV with header ``t,x,y,z[,label]``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        for col in ("x", "y", "z"):
            if col not in header:
                raise ParseError(f"missing column {col!r}", line=1)
        cols = [header.index(c) for c in ("x", "y", "z")]
        label_col = header.index("label") if "label" in header else None
        samples, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                samples.append([float(row[c]) for c in cols])
                if label_col is not None:
                    labels.append(_parse_label(row[label_col]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    if not samples:
        raise EmptyInput(f"{path} has no data rows")
    return SensorStream(np.array(samples), rate_hz, np.array(labels) if label_col is not None else None)
