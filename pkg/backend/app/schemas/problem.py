"""
Problem-file schema.
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class Dims(BaseModel):
    n: int = Field(ge=0)
    m: int = Field(ge=1)


class LowerSpec(BaseModel):
    ineq: List[str] = Field(default_factory=list)
    eq: List[str] = Field(default_factory=list)
    objective: str = "0"


class FlagSpec(BaseModel):
    convex_in_y: bool = False
    locally_bounded: bool = False


class BoxSpec(BaseModel):
    lower: List[float]
    upper: List[float]


class UpperSpec(BaseModel):
    objective: str
    box: BoxSpec


class PointSpec(BaseModel):
    x: List[float]
    y: List[float]


class ProblemFile(BaseModel):
    name: str
    description: str = ""
    dims: Dims
    lower: LowerSpec = Field(default_factory=LowerSpec)
    flags: FlagSpec = Field(default_factory=FlagSpec)
    upper: Optional[UpperSpec] = None
    points: Dict[str, PointSpec] = Field(default_factory=dict)

    @model_validator(mode="after")
    def point_dimensions(self) -> "ProblemFile":
        for key, point in self.points.items():
            if len(point.x) != self.dims.n or len(point.y) != self.dims.m:
                raise ValueError(
                    f"point {key!r} has dimensions ({len(point.x)}, {len(point.y)}), "
                    f"expected ({self.dims.n}, {self.dims.m})"
                )
        if self.upper is not None:
            box = self.upper.box
            if len(box.lower) != self.dims.n or len(box.upper) != self.dims.n:
                raise ValueError(f"upper-level box must have {self.dims.n} bounds per side")
        return self
