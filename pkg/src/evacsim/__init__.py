"""Authoritative multiplayer medical-evacuation wargame engine.

Headless batch runs, scripted policies, replay verification, debrief
analytics, and a WebSocket session server for the browser map client.
"""

from .engine import Engine, ENGINE_VERSION, Inject, InputRecord, SimEvent, day_night_phase, replay
from .scenario import Scenario, load_fixture, load_scenario, validate_scenario
from .scoring import ScoreBoard, ScoringMode, patient_score, score_screen

__all__ = [
    "Engine",
    "ENGINE_VERSION",
    "Inject",
    "InputRecord",
    "SimEvent",
    "Scenario",
    "ScoreBoard",
    "ScoringMode",
    "day_night_phase",
    "load_fixture",
    "load_scenario",
    "patient_score",
    "replay",
    "score_screen",
    "validate_scenario",
]
