"""
JSON models for everything the command line front end reads or writes.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .group_core import GroupPoint
from .symmetry import invariants_of_point


class OutputHeader(BaseModel):
    tool: str = "carnot47"
    version: str
    config_hash: str
    seed: int


class GroupPointModel(BaseModel):
    x: float
    ell: List[float] = Field(min_length=3, max_length=3)
    y: List[float] = Field(min_length=3, max_length=3)

    @classmethod
    def from_point(cls, q: GroupPoint) -> "GroupPointModel":
        return cls(**q.to_dict())


class InvariantModel(BaseModel):
    x: float
    ll: float = Field(ge=0)
    ly: float
    yy: float = Field(ge=0)

    @classmethod
    def of_point(cls, q: GroupPoint) -> "InvariantModel":
        return cls(**invariants_of_point(q).to_dict())


class ExpParamsModel(BaseModel):
    C1: float
    C2: float
    C3bar: float
    tau: float = Field(ge=0)
    length: Optional[float] = None


class ConnectAnswerModel(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    header: OutputHeader
    endpoint: GroupPointModel
    branch: str
    length: float
    K: float
    R: List[List[float]]
    residual: float
    maxwell: bool = False
    params: Optional[ExpParamsModel] = None
    direction: Optional[List[float]] = None
    roots: List[ExpParamsModel] = []
    tau_crit: Optional[float] = None
    invariants: Optional[InvariantModel] = None

    @field_validator("branch")
    @classmethod
    def known_branch(cls, v: str) -> str:
        if v not in ("line", "incn", "offcn"):
            raise ValueError(f"unknown branch {v!r}")
        return v


class ClassificationModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True, ser_json_inf_nan="constants")

    header: OutputHeader
    params: List[float] = Field(min_length=7, max_length=7)
    level_residual: float
    geodesic_class: str = Field(alias="class")
    cut_time: Optional[float] = None
    cut_endpoint: Optional[GroupPointModel] = None
    cut_invariants: Optional[InvariantModel] = None
    canonical: Optional[Dict] = None
    min_abs_det: Optional[float] = None
    oracle_max_deviation: Optional[float] = None


class CheckResult(BaseModel):
    """One row of the verification report; min_value is the smallest margin, positive when passing."""
    model_config = ConfigDict(populate_by_name=True, ser_json_inf_nan="constants")

    check: str
    grid: str
    min_value: float
    passed: bool = Field(alias="pass")


class VerifyReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    header: OutputHeader
    checks: List[CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)
