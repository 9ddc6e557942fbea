"""Run configuration: all tunables in one place, plus the override-file parser.

Override files are flat `key = value` text, one setting per line, with dotted
keys naming a section and field, e.g.

    radio.range_m = 250
    zrp.radius = 2
    aodv.hello_interval_s = 1

Blank lines and `#` comments are ignored.  Unknown keys are hard errors.
"""

from dataclasses import dataclass, field, fields

from .medium import RadioConfig
from .routing.base import CoreParams
from .routing.dsdv import DsdvParams
from .routing.aodv import AodvParams
from .routing.dsr import DsrParams
from .routing.zrp import ZrpParams


@dataclass
class SimParams:
    radio: RadioConfig = field(default_factory=RadioConfig)
    core: CoreParams = field(default_factory=CoreParams)
    dsdv: DsdvParams = field(default_factory=DsdvParams)
    aodv: AodvParams = field(default_factory=AodvParams)
    dsr: DsrParams = field(default_factory=DsrParams)
    zrp: ZrpParams = field(default_factory=ZrpParams)


def default_params() -> SimParams:
    return SimParams()


def _parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_overrides(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"override line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


def apply_overrides(params: SimParams, overrides: dict) -> SimParams:
    for key, value in overrides.items():
        try:
            section_name, field_name = key.split(".", 1)
        except ValueError:
            raise ValueError(f"override key {key!r} must look like section.field")
        section = getattr(params, section_name, None)
        if section is None:
            raise ValueError(f"unknown config section {section_name!r}")
        if field_name not in {f.name for f in fields(section)}:
            raise ValueError(f"unknown config key {key!r}")
        setattr(section, field_name, value)
    return params
