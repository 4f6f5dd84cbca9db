"""Attribute word banks and the instruction sentence grammar.

Global attribute values live in core.types; this module adds the
instance-level sampling banks (vehicle colors/objects, pedestrian clothing
and ages, traffic-light colors) and the sentence templates used everywhere
an instruction string is built. Templates ship as a repo fixture so the
produced text is reproducible and overridable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .core import (
    SEASON_VALUES,
    TIME_OF_DAY_VALUES,
    VEHICLE_CLASSES,
    WEATHER_VALUES,
)

VEHICLE_COLORS = ("red", "blue", "green", "yellow", "black", "white",
                  "silver", "grey")
VEHICLE_OBJECTS = ("car", "truck", "bus", "motorcycle with its rider",
                   "bicycle with its rider", "ambulance", "fire truck")
PEDESTRIAN_CLOTHING_ADJECTIVES = (
    "red", "blue", "green", "yellow", "black", "white", "casual", "formal",
    "businesslike", "vibrant", "summer", "winter", "sporty")
PEDESTRIAN_CLOTHING_ARTICLES = (
    "shirt", "jacket", "coat", "sneakers", "boots", "hat", "dress", "skirt",
    "trousers", "pants", "clothes")
PEDESTRIAN_AGES = ("young", "middle-aged", "elderly")
TRAFFIC_LIGHT_COLORS = ("green", "red", "yellow")

REMOVE_ALL_TRAFFIC_SENTENCE = (
    "remove all pedestrians and all vehicles from the scene.")


@dataclass(frozen=True)
class AttributeBanks:
    weather: tuple[str, ...] = WEATHER_VALUES
    time_of_day: tuple[str, ...] = TIME_OF_DAY_VALUES
    season: tuple[str, ...] = SEASON_VALUES
    vehicle_colors: tuple[str, ...] = VEHICLE_COLORS
    vehicle_objects: tuple[str, ...] = VEHICLE_OBJECTS
    pedestrian_adjectives: tuple[str, ...] = PEDESTRIAN_CLOTHING_ADJECTIVES
    pedestrian_articles: tuple[str, ...] = PEDESTRIAN_CLOTHING_ARTICLES
    pedestrian_ages: tuple[str, ...] = PEDESTRIAN_AGES
    traffic_light_colors: tuple[str, ...] = TRAFFIC_LIGHT_COLORS

    def global_bank(self, category: str) -> tuple[str, ...]:
        return {"weather": self.weather,
                "time_of_day": self.time_of_day,
                "season": self.season}[category]

    def as_dict(self) -> dict:
        return {k: list(v) for k, v in self.__dict__.items()}


DEFAULT_BANKS = AttributeBanks()

GLOBAL_EDIT_CATEGORIES = ("weather", "time_of_day", "season")


def load_templates(path: str | None = None) -> dict:
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    text = resources.files("driveedit.data").joinpath(
        "prompt_templates.json").read_text(encoding="utf-8")
    return json.loads(text)


_DEFAULT_TEMPLATES = load_templates()


def subject_kind(class_label: str) -> str:
    if class_label in VEHICLE_CLASSES:
        return "vehicle"
    if class_label == "person":
        return "pedestrian"
    if class_label == "traffic light":
        return "traffic_light"
    return "generic"


def template_for(action: str, class_label: str, templates: dict | None = None) -> str:
    group = (templates or _DEFAULT_TEMPLATES)[action]
    return group.get(subject_kind(class_label), group["generic"])


def build_sentence(action: str, subject: str, target: str | None = None,
                   templates: dict | None = None) -> str:
    """Simple-sentence grammar over (action, subject, target description)."""
    group = (templates or _DEFAULT_TEMPLATES)[action]["generic"]
    if action == "insert":
        return group.format(target=target)
    if action == "delete":
        return group.format(subject=subject)
    return group.format(subject=subject, target=target)


def global_edit_sentence(category: str, value: str,
                         templates: dict | None = None) -> str:
    tpl = (templates or _DEFAULT_TEMPLATES)["global"]["generic"]
    return tpl.format(category=category.replace("_", " "), value=value)
