"""TSK fuzzy model representation and inference.

A model keeps all rule parameters in two numpy blocks so that inference,
gradients and pruning can work on every rule at once:

- ``antecedents`` with shape (R, M, 2) holding (center, spread) per Gaussian MF,
  or (R, M, 4) holding (a, b, c, d) per trapezoidal MF;
- ``consequents`` with shape (R, M + 1), column 0 being the bias w_{r,0}.

The flattened parameter vector theta is the antecedent block followed by the
consequent block, both in C order.
"""

from dataclasses import InitVar, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import ValidationError

from ..models import (
    GaussianDocument,
    MembershipKind,
    ModelDocument,
    PreprocessingParams,
    RuleDocument,
    TrapezoidDocument,
)
from .errors import InputShapeError, ModelFileError, ParameterDomainError

# Raw firing sums at or below this use the uniform fallback
FIRING_EPSILON = 1e-12
# Smallest Gaussian spread, in z-normalized feature units
SIGMA_MIN = 1e-3
# Gap restored between tied trapezoid feet and shoulders
TRAPEZOID_SEPARATION = 1e-6

PARAMS_PER_MF = {MembershipKind.GAUSSIAN: 2, MembershipKind.TRAPEZOID: 4}


def _gaussian(x: np.ndarray, center: np.ndarray, spread: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * ((x - center) / spread) ** 2)


def _trapezoid(
    x: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray
) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        rising = (x - a) / (b - a)
        falling = (d - x) / (d - c)
    grade = np.where((x >= b) & (x <= c), 1.0, 0.0)
    grade = np.where((x > a) & (x < b), rising, grade)
    grade = np.where((x > c) & (x < d), falling, grade)
    return np.clip(grade, 0.0, 1.0)


@dataclass(frozen=True)
class GaussianMf:
    """Gaussian membership function exp(-(x - center)^2 / (2 spread^2))."""

    center: float
    spread: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.center) and np.isfinite(self.spread) and self.spread > 0):
            raise ParameterDomainError(
                f"Gaussian MF needs finite center and spread > 0, "
                f"got center={self.center}, spread={self.spread}"
            )

    @property
    def kind(self) -> MembershipKind:
        return MembershipKind.GAUSSIAN

    def params(self) -> tuple[float, ...]:
        return (self.center, self.spread)

    def grade(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        center, spread = np.float64(self.center), np.float64(self.spread)
        value = _gaussian(np.asarray(x, dtype=float), center, spread)
        return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class TrapezoidMf:
    """Trapezoidal membership function with feet a, d and shoulders b, c."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        if not all(np.isfinite(v) for v in self.params()):
            raise ParameterDomainError(f"Trapezoid MF parameters must be finite: {self.params()}")
        if not (self.a < self.b <= self.c < self.d):
            raise ParameterDomainError(
                f"Trapezoid MF needs a < b <= c < d, got {self.params()}"
            )

    @property
    def kind(self) -> MembershipKind:
        return MembershipKind.TRAPEZOID

    def params(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c, self.d)

    def grade(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        a, b, c, d = (np.float64(v) for v in self.params())
        value = _trapezoid(np.asarray(x, dtype=float), a, b, c, d)
        return float(value) if np.ndim(value) == 0 else value


MembershipFunction = Union[GaussianMf, TrapezoidMf]


def _make_mf(kind: MembershipKind, params: np.ndarray) -> MembershipFunction:
    if kind == MembershipKind.GAUSSIAN:
        return GaussianMf(center=float(params[0]), spread=float(params[1]))
    a, b, c, d = (float(v) for v in params)
    return TrapezoidMf(a=a, b=b, c=c, d=d)


@dataclass(frozen=True)
class Rule:
    """IF x_1 is X_1 and ... and x_M is X_M THEN y = bias + weights . x"""

    antecedents: tuple[MembershipFunction, ...]
    bias: float
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.antecedents) == 0:
            raise InputShapeError("A rule needs at least one antecedent")
        if len(self.antecedents) != len(self.weights):
            raise InputShapeError(
                f"Rule has {len(self.antecedents)} antecedents but {len(self.weights)} weights"
            )

    @property
    def num_features(self) -> int:
        return len(self.antecedents)


def _as_vector(x: Union[np.ndarray, list[float]], length: int) -> np.ndarray:
    vector = np.asarray(x, dtype=float)
    if vector.ndim != 1 or vector.shape[0] != length:
        raise InputShapeError(f"Expected a vector of length {length}, got shape {vector.shape}")
    return vector


def membership(mf: MembershipFunction, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Membership grade of ``x`` on ``mf``, always within [0, 1]."""
    return mf.grade(x)


def firing_level(rule: Rule, x: Union[np.ndarray, list[float]]) -> float:
    """Product of the rule's membership grades for input ``x``."""
    vector = _as_vector(x, rule.num_features)
    grades = [float(membership(mf, value)) for mf, value in zip(rule.antecedents, vector)]
    return max(float(np.prod(grades)), 0.0)


def rule_output(rule: Rule, x: Union[np.ndarray, list[float]]) -> float:
    """First-order consequent w_0 + sum_m w_m x_m."""
    vector = _as_vector(x, rule.num_features)
    return float(rule.bias + np.dot(np.asarray(rule.weights, dtype=float), vector))


def normalize_firing(firing: np.ndarray) -> np.ndarray:
    """Row-normalize an (N, R) firing matrix.

    Rows whose sum is at most FIRING_EPSILON get the uniform vector 1/R.
    """
    totals = firing.sum(axis=1, keepdims=True)
    degenerate = totals <= FIRING_EPSILON
    safe_totals = np.where(degenerate, 1.0, totals)
    uniform = 1.0 / firing.shape[1]
    return np.where(degenerate, uniform, firing / safe_totals)


@dataclass(frozen=True, eq=False)
class TskModel:
    """An ordered rulebase of R first-order TSK rules over M features.

    Arrays are copied and made read-only, so a model can be shared between
    threads for prediction. Pass ``check=False`` to build an intermediate model
    whose MF parameters have not been repaired yet (used during training).
    """

    mf_type: MembershipKind
    antecedents: np.ndarray
    consequents: np.ndarray
    check: InitVar[bool] = True

    def __post_init__(self, check: bool) -> None:
        kind = MembershipKind(self.mf_type)
        antecedents = np.array(self.antecedents, dtype=float)
        consequents = np.array(self.consequents, dtype=float)
        antecedents.setflags(write=False)
        consequents.setflags(write=False)
        object.__setattr__(self, "mf_type", kind)
        object.__setattr__(self, "antecedents", antecedents)
        object.__setattr__(self, "consequents", consequents)

        width = PARAMS_PER_MF[kind]
        if antecedents.ndim != 3 or antecedents.shape[2] != width:
            raise InputShapeError(
                f"{kind.value} antecedents must have shape (R, M, {width}), "
                f"got {antecedents.shape}"
            )
        num_rules, num_features, _ = antecedents.shape
        if num_rules < 1 or num_features < 1:
            raise InputShapeError("A model needs at least one rule and one feature")
        if consequents.shape != (num_rules, num_features + 1):
            raise InputShapeError(
                f"consequents must have shape ({num_rules}, {num_features + 1}), "
                f"got {consequents.shape}"
            )
        if check:
            self._validate_domain()

    def _validate_domain(self) -> None:
        if not (np.all(np.isfinite(self.antecedents)) and np.all(np.isfinite(self.consequents))):
            raise ParameterDomainError("Model parameters must be finite")
        if self.mf_type == MembershipKind.GAUSSIAN:
            bad = np.argwhere(self.antecedents[..., 1] <= 0)
            if bad.size:
                r, m = bad[0]
                raise ParameterDomainError(
                    f"Gaussian spread must be > 0 (rule {r}, feature {m}): "
                    f"{self.antecedents[r, m, 1]}"
                )
        else:
            a, b, c, d = (self.antecedents[..., k] for k in range(4))
            bad = np.argwhere(~((a < b) & (b <= c) & (c < d)))
            if bad.size:
                r, m = bad[0]
                raise ParameterDomainError(
                    f"Trapezoid needs a < b <= c < d (rule {r}, feature {m}): "
                    f"{tuple(self.antecedents[r, m])}"
                )

    @classmethod
    def from_rules(cls, rules: list[Rule]) -> "TskModel":
        """Build a model from Rule objects sharing one MF family."""
        if not rules:
            raise InputShapeError("A model needs at least one rule")
        num_features = rules[0].num_features
        kinds = {mf.kind for rule in rules for mf in rule.antecedents}
        if len(kinds) != 1:
            raise ParameterDomainError("All MFs of a model must share one shape family")
        for index, rule in enumerate(rules):
            if rule.num_features != num_features:
                raise InputShapeError(
                    f"Rule {index} has {rule.num_features} features, expected {num_features}"
                )
        antecedents = np.array([[mf.params() for mf in rule.antecedents] for rule in rules])
        consequents = np.array([[rule.bias, *rule.weights] for rule in rules])
        return cls(kinds.pop(), antecedents, consequents)

    @property
    def num_rules(self) -> int:
        return int(self.antecedents.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.antecedents.shape[1])

    @property
    def num_parameters(self) -> int:
        return int(self.antecedents.size + self.consequents.size)

    @property
    def rules(self) -> list[Rule]:
        """The rulebase as Rule objects."""
        return [
            Rule(
                antecedents=tuple(_make_mf(self.mf_type, p) for p in self.antecedents[r]),
                bias=float(self.consequents[r, 0]),
                weights=tuple(float(w) for w in self.consequents[r, 1:]),
            )
            for r in range(self.num_rules)
        ]

    def as_matrix(self, x: Union[np.ndarray, list[float]]) -> np.ndarray:
        """Return ``x`` as an (N, M) matrix, checking the feature count."""
        data = np.asarray(x, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[1] != self.num_features:
            raise InputShapeError(
                f"Model expects {self.num_features} features, got input of shape "
                f"{np.shape(x)}"
            )
        return data

    def grades(self, X: np.ndarray) -> np.ndarray:
        """Membership grades with shape (N, R, M)."""
        data = self.as_matrix(X)[:, None, :]
        params = self.antecedents[None]
        if self.mf_type == MembershipKind.GAUSSIAN:
            return _gaussian(data, params[..., 0], params[..., 1])
        return _trapezoid(data, params[..., 0], params[..., 1], params[..., 2], params[..., 3])

    def firing_levels(self, X: np.ndarray) -> np.ndarray:
        """Raw firing levels with shape (N, R)."""
        return np.maximum(np.prod(self.grades(X), axis=2), 0.0)

    def rule_outputs(self, X: np.ndarray) -> np.ndarray:
        """Consequent outputs y_r(x_n) with shape (N, R)."""
        data = self.as_matrix(X)
        return self.consequents[:, 0][None, :] + data @ self.consequents[:, 1:].T

    def parameters(self) -> np.ndarray:
        """Flattened parameter vector theta (a fresh, writable copy)."""
        return np.concatenate([self.antecedents.ravel(), self.consequents.ravel()])

    def split_parameters(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Reshape a flat theta into (antecedents, consequents) blocks."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_parameters,):
            raise InputShapeError(
                f"Expected {self.num_parameters} parameters, got shape {theta.shape}"
            )
        cut = self.antecedents.size
        return (
            theta[:cut].reshape(self.antecedents.shape).copy(),
            theta[cut:].reshape(self.consequents.shape).copy(),
        )

    def with_parameters(self, theta: np.ndarray, check: bool = True) -> "TskModel":
        """Same structure, new parameter values."""
        antecedents, consequents = self.split_parameters(theta)
        return TskModel(self.mf_type, antecedents, consequents, check=check)

    def subset(self, indices: Union[np.ndarray, list[int]]) -> "TskModel":
        """Keep only the rules at ``indices``, in the given order."""
        keep = np.asarray(indices, dtype=int)
        if keep.size == 0:
            raise InputShapeError("Cannot remove every rule from a model")
        return TskModel(self.mf_type, self.antecedents[keep], self.consequents[keep])

    def to_document(self, preprocessing: Optional[PreprocessingParams] = None) -> ModelDocument:
        """Convert to the JSON document schema."""
        rules = []
        for rule in range(self.num_rules):
            if self.mf_type == MembershipKind.GAUSSIAN:
                antecedents: list[Union[GaussianDocument, TrapezoidDocument]] = [
                    GaussianDocument(center=float(p[0]), spread=float(p[1]))
                    for p in self.antecedents[rule]
                ]
            else:
                antecedents = [
                    TrapezoidDocument(a=float(p[0]), b=float(p[1]), c=float(p[2]), d=float(p[3]))
                    for p in self.antecedents[rule]
                ]
            rules.append(
                RuleDocument(
                    antecedents=antecedents,
                    bias=float(self.consequents[rule, 0]),
                    weights=[float(w) for w in self.consequents[rule, 1:]],
                )
            )
        return ModelDocument(
            mf_type=self.mf_type,
            num_features=self.num_features,
            rules=rules,
            preprocessing=preprocessing,
        )

    @classmethod
    def from_document(cls, document: ModelDocument) -> "TskModel":
        """Rebuild a model from its JSON document."""
        gaussian = document.mf_type == MembershipKind.GAUSSIAN
        expected = GaussianDocument if gaussian else TrapezoidDocument
        width = document.num_features
        antecedents = []
        consequents = []
        for index, rule in enumerate(document.rules):
            if len(rule.antecedents) != width or len(rule.weights) != width:
                raise ModelFileError(
                    f"Rule {index} does not have {width} antecedents and weights"
                )
            params = []
            for mf in rule.antecedents:
                if not isinstance(mf, expected):
                    raise ModelFileError(
                        f"Rule {index} mixes MF shapes; model is {document.mf_type.value}"
                    )
                params.append(
                    [mf.center, mf.spread]
                    if isinstance(mf, GaussianDocument)
                    else [mf.a, mf.b, mf.c, mf.d]
                )
            antecedents.append(params)
            consequents.append([rule.bias, *rule.weights])
        try:
            return cls(document.mf_type, np.array(antecedents), np.array(consequents))
        except ParameterDomainError as e:
            raise ModelFileError(f"Invalid model parameters: {e}") from e


def normalized_firing_levels(
    model: TskModel,
    x: Union[np.ndarray, list[float]],
    firing: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Normalized firing levels f_r / sum_k f_k.

    ``x`` may be one M-vector (returns an R-vector) or an (N, M) matrix
    (returns (N, R)). ``firing`` overrides the raw firing levels, e.g. after
    DropRule masking.
    """
    single = np.ndim(x) == 1
    data = model.as_matrix(x)
    if firing is None:
        raw = model.firing_levels(data)
    else:
        raw = np.atleast_2d(np.asarray(firing, dtype=float))
        if raw.shape != (data.shape[0], model.num_rules):
            raise InputShapeError(
                f"Firing levels must have shape ({data.shape[0]}, {model.num_rules}), "
                f"got {np.shape(firing)}"
            )
        if np.any(raw < 0):
            raise ParameterDomainError("Firing levels must be nonnegative")
    levels = normalize_firing(raw)
    return levels[0] if single else levels


def predict(
    model: TskModel,
    x: Union[np.ndarray, list[float]],
    firing: Optional[np.ndarray] = None,
) -> Union[float, np.ndarray]:
    """TSK output sum_r fbar_r(x) y_r(x) for one input or an (N, M) batch."""
    single = np.ndim(x) == 1
    data = model.as_matrix(x)
    levels = normalized_firing_levels(model, data, firing)
    output = np.sum(levels * model.rule_outputs(data), axis=1)
    return float(output[0]) if single else output


def rmse(predictions: ArrayLike, targets: ArrayLike) -> float:
    """Root mean squared error."""
    predicted = np.asarray(predictions, dtype=float).ravel()
    expected = np.asarray(targets, dtype=float).ravel()
    if predicted.size == 0:
        raise InputShapeError("RMSE needs at least one sample")
    if predicted.shape != expected.shape:
        raise InputShapeError(
            f"RMSE inputs differ in length: {predicted.size} vs {expected.size}"
        )
    return float(np.sqrt(np.mean((predicted - expected) ** 2)))


def save_model(
    model: TskModel, path: Path, preprocessing: Optional[PreprocessingParams] = None
) -> Path:
    """Write ``model`` as JSON. Floats are written in shortest round-trip form."""
    document = model.to_document(preprocessing)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2, exclude_none=True), encoding="utf-8")
    return path


def load_model(path: Path) -> tuple[TskModel, Optional[PreprocessingParams]]:
    """Read a model JSON file and any preprocessing recorded with it."""
    if not path.exists():
        raise ModelFileError(f"Model file not found: {path}")
    try:
        document = ModelDocument.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ModelFileError(f"Invalid model file {path}: {e}") from e
    return TskModel.from_document(document), document.preprocessing
