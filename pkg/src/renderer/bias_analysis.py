"""Rendered-distance bias of single rays with known SDF profiles.

A profile is a function ``t -> f(t)`` along one ray. The analyzer samples it
densely, runs it through ``alphas_and_weights`` and ``composite`` and
compares the rendered distance with the true root. Linear profiles render
unbiased up to the discretization; profiles whose slope changes at the
surface do not.
"""

import csv
import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from numpy.typing import NDArray
from scipy import optimize

from src.renderer.volume import RaySamples, composite, fill_samples
from src.utils.errors import NoCrossingError, RejectedInputError

logger = logging.getLogger(__name__)

Profile = Callable[[NDArray[np.float64]], NDArray[np.float64]]

ROOT_TOLERANCE = 1e-10


def linear_profile(slope: float, t_star: float) -> Profile:
    """``f(t) = -slope * (t - t_star)``: a plane hit at angle ``acos(slope)``."""

    def profile(t: NDArray[np.float64]) -> NDArray[np.float64]:
        return -slope * (np.asarray(t, dtype=np.float64) - t_star)

    return profile


def piecewise_profile(slope_before: float, slope_after: float, t_star: float) -> Profile:
    """Linear on either side of ``t_star`` with different slopes."""

    def profile(t: NDArray[np.float64]) -> NDArray[np.float64]:
        d = np.asarray(t, dtype=np.float64) - t_star
        return np.where(d < 0, -slope_before * d, -slope_after * d)

    return profile


def parse_profile(text: str) -> Profile:
    """Build a profile from ``linear:slope:t_star`` or ``piecewise:before:after:t_star``.

    Raises:
        RejectedInputError: On an unknown kind or malformed numbers.
    """
    kind, *args = text.split(":")
    try:
        values = [float(a) for a in args]
    except ValueError as e:
        raise RejectedInputError(f"bad number in profile '{text}'") from e
    if kind == "linear" and len(values) == 2:
        return linear_profile(*values)
    if kind == "piecewise" and len(values) == 3:
        return piecewise_profile(*values)
    raise RejectedInputError(
        f"profile must be linear:slope:t_star or piecewise:before:after:t_star, got '{text}'"
    )


@dataclass
class BiasReport:
    """Result of one bias analysis."""

    t_star: float
    t_rendered: float
    samples: RaySamples

    @property
    def bias(self) -> float:
        return self.t_rendered - self.t_star

    def write_csv(self, stream: TextIO) -> None:
        """Per-sample rows ``t,sdf,alpha,weight`` and a ``#`` summary line.

        The last sample closes the last interval, so its alpha and weight are empty.
        """
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["t", "sdf", "alpha", "weight"])
        alpha = self.samples.alpha.value
        weight = self.samples.weight.value
        for i, (t, f) in enumerate(zip(self.samples.t, self.samples.sdf.value)):
            if i < len(alpha):
                values = (t, f, alpha[i], weight[i])
                writer.writerow([repr(float(v)) for v in values])
            else:
                writer.writerow([repr(float(t)), repr(float(f)), "", ""])
        stream.write(
            f"# t_star={self.t_star!r} t_rendered={self.t_rendered!r} bias={self.bias!r}\n"
        )


def find_root(profile: Profile, t: NDArray[np.float64], f: NDArray[np.float64]) -> float:
    """The single sign change of ``f`` sampled at ``t``, refined by bisection.

    Raises:
        NoCrossingError: If the samples never change sign.
        RejectedInputError: If they change sign more than once.
    """
    signs = np.sign(f)
    nonzero = signs[signs != 0]
    flips = int(np.count_nonzero(nonzero[1:] != nonzero[:-1]))
    if flips == 0:
        raise NoCrossingError("profile has no crossing in the analysed range")
    if flips > 1:
        raise RejectedInputError(f"profile must cross zero once, found {flips} sign changes")

    zeros = np.flatnonzero(f == 0.0)
    if zeros.size:
        return float(t[zeros[0]])
    k = int(np.flatnonzero(signs[:-1] * signs[1:] < 0)[0])
    root = optimize.bisect(
        lambda x: float(profile(np.asarray(x))), t[k], t[k + 1], xtol=ROOT_TOLERANCE
    )
    return float(root)


def analyze_ray_bias(
    profile: Profile,
    s: float,
    n: int,
    t_range: tuple[float, float] = (0.0, 1.0),
    anchor: str = "left",
) -> BiasReport:
    """Rendered distance against the true root for ``n`` evenly spaced samples.

    With left anchors a linear profile renders about half a sample spacing
    early; ``anchor="midpoint"`` measures the bias without that offset.

    Raises:
        RejectedInputError: If ``n < 2``, the range is empty or the ray
            never accumulates weight (the profile only leaves the surface).
        NoCrossingError: If the profile has no sign change in ``t_range``.
    """
    lo, hi = t_range
    if n < 2 or not lo < hi:
        raise RejectedInputError(f"need n >= 2 and an increasing range, got n={n}, range={t_range}")
    t = np.linspace(lo, hi, n)
    f = np.asarray(profile(t), dtype=np.float64)
    t_star = find_root(profile, t, f)

    samples = fill_samples(t, np.zeros(3), np.array([0.0, 0.0, 1.0]), f, s)
    colors = np.zeros((n, 3))
    result = composite(samples, colors, weight_eps=0.0, anchor=anchor)
    if not bool(result.has_weight):
        raise RejectedInputError("profile never enters the surface; no weight accumulated")
    report = BiasReport(t_star=t_star, t_rendered=result.t_rendered.item(), samples=samples)
    logger.debug("Bias analysis: s=%s n=%d bias=%.3e", s, n, report.bias)
    return report
