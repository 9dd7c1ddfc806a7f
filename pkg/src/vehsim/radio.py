"""Passive cellular layer: RSSI, cell attachment, handover bookkeeping.

Signal strength follows a log-distance path-loss law anchored at a 1 m
free-space reference; attachment is strongest-cell with hysteresis and a
time-to-trigger, evaluated once per mobility step so that the handover
sequence does not depend on how often traces are sampled.  Nothing here
feeds back into vehicle motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import substream

SPEED_OF_LIGHT = 3.0e8  # m/s
D_REF_M = 1.0  # path-loss reference distance
DEFAULT_TX_POWER_DBM = 46.0
DEFAULT_CARRIER_MHZ = 1800.0
DEFAULT_PATH_LOSS_EXPONENT = 3.5  # urban macro default
DEFAULT_HYSTERESIS_DB = 3.0
DEFAULT_TIME_TO_TRIGGER_S = 1.0
DEFAULT_PINGPONG_WINDOW_S = 10.0
_TTT_SLACK = 1e-12  # absorbs float drift when comparing elapsed time to TTT


@dataclass(frozen=True)
class BaseStation:
    """Omnidirectional transmitter at a fixed map position."""

    id: str
    x: float
    y: float
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM
    carrier_mhz: float = DEFAULT_CARRIER_MHZ

    def __post_init__(self) -> None:
        if self.tx_power_dbm <= 0:
            raise ValueError(f"station {self.id}: tx_power must be > 0 dBm")
        if self.carrier_mhz <= 0:
            raise ValueError(f"station {self.id}: carrier must be > 0 MHz")


def reference_loss_db(carrier_mhz: float) -> float:
    """Free-space path loss at the 1 m reference distance."""
    f_hz = carrier_mhz * 1e6
    return 20.0 * math.log10(4.0 * math.pi * D_REF_M * f_hz / SPEED_OF_LIGHT)


def rssi(
    station: BaseStation,
    x: float,
    y: float,
    *,
    path_loss_exponent: float = DEFAULT_PATH_LOSS_EXPONENT,
) -> float:
    """Received signal strength (dBm) at (x, y) from ``station``.

    Log-distance model: tx_power − [PL(d_ref) + 10·n·log10(d/d_ref)] with the
    distance floored at d_ref, so the value is finite everywhere.
    """
    d = max(math.hypot(x - station.x, y - station.y), D_REF_M)
    loss = reference_loss_db(station.carrier_mhz) + 10.0 * path_loss_exponent * math.log10(d / D_REF_M)
    return station.tx_power_dbm - loss


@dataclass(frozen=True)
class HandoverEvent:
    """Completed change of serving cell."""

    time: float
    vehicle_id: int
    from_cell: str
    to_cell: str
    x: float
    y: float

    def __post_init__(self) -> None:
        if self.from_cell == self.to_cell:
            raise ValueError("handover must change the serving cell")


@dataclass
class Attachment:
    """Current serving cell of one vehicle plus its handover history."""

    vehicle_id: int
    serving_cell: str
    since: float
    history: list[HandoverEvent] = field(default_factory=list)


def detect_ping_pong(history: list[HandoverEvent], window_s: float) -> list[tuple[float, str, str]]:
    """Flag every A→B followed by B→A within ``window_s``.

    ``history`` must be time-ordered (as produced by :class:`RadioObserver`).
    Returns (time of the returning handover, cell A, cell B) per occurrence.
    """
    flagged = []
    for first, second in zip(history, history[1:]):
        if (
            first.to_cell == second.from_cell
            and second.to_cell == first.from_cell
            and second.time - first.time <= window_s
        ):
            flagged.append((second.time, first.from_cell, first.to_cell))
    return flagged


class RadioObserver:
    """Tracks per-vehicle attachment against a fixed station set.

    ``update`` must be called for every vehicle after every mobility step;
    a candidate cell must beat the serving cell by more than the hysteresis
    margin continuously for the whole time-to-trigger before the handover
    completes.  A different candidate appearing restarts the trigger timer.
    The first update attaches to the strongest cell with no hysteresis and
    no event.

    Optional log-normal shadowing draws one value per station per update
    from a per-vehicle stream; with sigma = 0 (default) no draws happen and
    measurements are pure path loss.
    """

    def __init__(
        self,
        stations: list[BaseStation],
        *,
        hysteresis_db: float = DEFAULT_HYSTERESIS_DB,
        time_to_trigger_s: float = DEFAULT_TIME_TO_TRIGGER_S,
        path_loss_exponent: float = DEFAULT_PATH_LOSS_EXPONENT,
        shadowing_sigma_db: float = 0.0,
        seed: int = 0,
    ) -> None:
        if not stations:
            raise ValueError("at least one base station required")
        ids = [s.id for s in stations]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate station ids")
        self.stations = sorted(stations, key=lambda s: s.id)
        self.hysteresis_db = hysteresis_db
        self.time_to_trigger_s = time_to_trigger_s
        self.path_loss_exponent = path_loss_exponent
        self.shadowing_sigma_db = shadowing_sigma_db
        self.seed = seed
        self.attachments: dict[int, Attachment] = {}
        self._candidate: dict[int, tuple[str, float]] = {}  # vehicle -> (cell, since)
        self._last_levels: dict[int, dict[str, float]] = {}
        self._shadow_rng: dict[int, np.random.Generator] = {}

    def measure(self, vehicle_id: int, x: float, y: float) -> dict[str, float]:
        """RSSI per station id at (x, y), including shadowing when enabled."""
        levels = {
            s.id: rssi(s, x, y, path_loss_exponent=self.path_loss_exponent) for s in self.stations
        }
        if self.shadowing_sigma_db > 0.0:
            rng = self._shadow_rng.get(vehicle_id)
            if rng is None:
                rng = self._shadow_rng[vehicle_id] = substream(self.seed, "shadowing", vehicle_id)
            for s in self.stations:
                levels[s.id] += float(rng.normal(0.0, self.shadowing_sigma_db))
        return levels

    @staticmethod
    def _strongest(levels: dict[str, float]) -> str:
        return min(levels, key=lambda cid: (-levels[cid], cid))

    def update(self, vehicle_id: int, x: float, y: float, t: float) -> HandoverEvent | None:
        """Re-evaluate the attachment of one vehicle; returns a completed handover."""
        levels = self.measure(vehicle_id, x, y)
        self._last_levels[vehicle_id] = levels
        att = self.attachments.get(vehicle_id)
        if att is None:
            self.attachments[vehicle_id] = Attachment(vehicle_id, self._strongest(levels), t)
            return None

        best = self._strongest(levels)
        if best == att.serving_cell or levels[best] <= levels[att.serving_cell] + self.hysteresis_db:
            self._candidate.pop(vehicle_id, None)
            return None

        cand = self._candidate.get(vehicle_id)
        if cand is None or cand[0] != best:
            self._candidate[vehicle_id] = (best, t)
            cand = (best, t)
        if t - cand[1] >= self.time_to_trigger_s - _TTT_SLACK:
            event = HandoverEvent(t, vehicle_id, att.serving_cell, best, x, y)
            att.serving_cell = best
            att.since = t
            att.history.append(event)
            self._candidate.pop(vehicle_id, None)
            return event
        return None

    def current(self, vehicle_id: int) -> tuple[str, float] | None:
        """(serving cell, its RSSI at the last update) or None before any update."""
        att = self.attachments.get(vehicle_id)
        if att is None:
            return None
        return att.serving_cell, self._last_levels[vehicle_id][att.serving_cell]

    def ping_pongs(self, window_s: float = DEFAULT_PINGPONG_WINDOW_S) -> dict[int, list[tuple[float, str, str]]]:
        """Ping-pong occurrences per vehicle over the full recorded history."""
        out = {}
        for vid, att in self.attachments.items():
            hits = detect_ping_pong(att.history, window_s)
            if hits:
                out[vid] = hits
        return out
