"""Versioned text serialization for fitted models and scalers.

One self-describing format for every model family: a version header,
family name, config hash, the training feature column list, hyperparams,
then family-specific sections. Floats are written with ``repr`` so
round-trips are exact and re-serialization is byte-identical.
"""

from __future__ import annotations

import io
import sys

import numpy as np

from .classifiers import GnbModel, KnnIndex, SvmModel
from .errors import DataError
from .features import ScalerParams
from .linear import LinearModel
from .neural import MlpModel
from .trees import ForestModel, GbdtModel, TreeNode

FORMAT_HEADER = "tweetcast-model"
FORMAT_VERSION = 1


class VersionMismatch(DataError):
    pass


class ColumnListMismatch(DataError):
    pass


class CorruptFile(DataError):
    pass


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    return str(v)


def _fmt_vector(arr) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(arr, dtype=float).ravel())


def _parse_vector(text: str) -> np.ndarray:
    if not text.strip():
        return np.array([])
    return np.array([float(x) for x in text.split()])


def _write_tree(out, tree: TreeNode, label: str) -> None:
    nodes: list[TreeNode] = []

    def index(nd):
        nodes.append(nd)
        if not nd.is_leaf:
            index(nd.left)
            index(nd.right)

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 100000))
    try:
        index(tree)
        positions = {id(nd): i for i, nd in enumerate(nodes)}
        out.write(f"{label} nodes {len(nodes)}\n")
        for i, nd in enumerate(nodes):
            if nd.is_leaf:
                if isinstance(nd.value, tuple):
                    out.write(
                        f"node {i} leafp {repr(float(nd.value[0]))} {repr(float(nd.value[1]))} "
                        f"n {nd.n_samples} imp {repr(float(nd.impurity))}\n"
                    )
                else:
                    out.write(
                        f"node {i} leaf {repr(float(nd.value))} n {nd.n_samples} "
                        f"imp {repr(float(nd.impurity))}\n"
                    )
            else:
                out.write(
                    f"node {i} split {nd.feature} {repr(float(nd.threshold))} "
                    f"left {positions[id(nd.left)]} right {positions[id(nd.right)]} "
                    f"n {nd.n_samples} imp {repr(float(nd.impurity))}\n"
                )
    finally:
        sys.setrecursionlimit(old)


def _read_tree(lines, pos: int):
    header = lines[pos].split()
    if len(header) < 3 or header[-2] != "nodes":
        raise CorruptFile(f"bad tree header: {lines[pos]!r}")
    count = int(header[-1])
    specs = []
    for i in range(count):
        parts = lines[pos + 1 + i].split()
        if parts[0] != "node" or int(parts[1]) != i:
            raise CorruptFile(f"bad node line: {lines[pos + 1 + i]!r}")
        specs.append(parts[2:])
    nodes = [TreeNode() for _ in range(count)]
    for i, parts in enumerate(specs):
        nd = nodes[i]
        kind = parts[0]
        if kind == "leaf":
            nd.value = float(parts[1])
            nd.n_samples = int(parts[3])
            nd.impurity = float(parts[5])
        elif kind == "leafp":
            nd.value = (float(parts[1]), float(parts[2]))
            nd.n_samples = int(parts[4])
            nd.impurity = float(parts[6])
        elif kind == "split":
            nd.feature = int(parts[1])
            nd.threshold = float(parts[2])
            nd.left = nodes[int(parts[4])]
            nd.right = nodes[int(parts[6])]
            nd.n_samples = int(parts[8])
            nd.impurity = float(parts[10])
        else:
            raise CorruptFile(f"unknown node kind {kind!r}")
    return nodes[0], pos + 1 + count


def _parse_params(text: str) -> dict:
    params: dict = {}
    if not text.strip():
        return params
    for item in text.split():
        key, _, raw = item.partition("=")
        if raw == "none":
            params[key] = None
        else:
            try:
                params[key] = int(raw)
            except ValueError:
                try:
                    params[key] = float(raw)
                except ValueError:
                    params[key] = raw
    return params


def save_model(model, path, columns=(), config_hash: str = "") -> None:
    """Serialize any fitted model family to the versioned text format."""
    out = io.StringIO()
    family, body = _serialize_body(model)
    out.write(f"{FORMAT_HEADER} v{FORMAT_VERSION}\n")
    out.write(f"family: {family}\n")
    out.write(f"config_hash: {config_hash}\n")
    out.write(f"columns: {','.join(columns)}\n")
    out.write(body)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(out.getvalue())


def _hyper_line(params: dict) -> str:
    return "hyperparams: " + " ".join(f"{k}={_fmt_value(v)}" for k, v in sorted(params.items())) + "\n"


def _serialize_body(model):
    if isinstance(model, LinearModel):
        body = io.StringIO()
        body.write(_hyper_line(model.hyperparams))
        body.write(f"weights: {_fmt_vector(model.weights)}\n")
        body.write(f"intercept: {repr(float(model.intercept))}\n")
        return model.family, body.getvalue()
    if isinstance(model, TreeNode):
        body = io.StringIO()
        body.write(_hyper_line({}))
        _write_tree(body, model, "tree 0")
        return "cart", body.getvalue()
    if isinstance(model, ForestModel):
        body = io.StringIO()
        body.write(_hyper_line(model.hyperparams))
        body.write(f"task: {model.task}\n")
        body.write(f"bootstrap: {int(model.bootstrap)}\n")
        body.write(f"n_trees: {len(model.trees)}\n")
        for i, tree in enumerate(model.trees):
            _write_tree(body, tree, f"tree {i}")
        return "forest", body.getvalue()
    if isinstance(model, GbdtModel):
        body = io.StringIO()
        body.write(_hyper_line(model.hyperparams))
        body.write(f"init_score: {repr(float(model.init_score))}\n")
        body.write(f"learning_rate: {repr(float(model.learning_rate))}\n")
        body.write(f"n_trees: {len(model.trees)}\n")
        for i, tree in enumerate(model.trees):
            _write_tree(body, tree, f"tree {i}")
        return "gbdt", body.getvalue()
    if isinstance(model, KnnIndex):
        body = io.StringIO()
        body.write(_hyper_line({"k": model.k}))
        body.write(f"n_rows: {model.X.shape[0]} n_cols: {model.X.shape[1]}\n")
        for row in model.X:
            body.write(f"row: {_fmt_vector(row)}\n")
        body.write(f"labels: {' '.join(str(int(v)) for v in model.y)}\n")
        return "knn", body.getvalue()
    if isinstance(model, GnbModel):
        body = io.StringIO()
        body.write(_hyper_line({}))
        body.write(f"priors: {_fmt_vector(model.priors)}\n")
        body.write(f"mean0: {_fmt_vector(model.means[0])}\n")
        body.write(f"mean1: {_fmt_vector(model.means[1])}\n")
        body.write(f"var0: {_fmt_vector(model.variances[0])}\n")
        body.write(f"var1: {_fmt_vector(model.variances[1])}\n")
        body.write(f"epsilon: {repr(float(model.epsilon))}\n")
        return "gnb", body.getvalue()
    if isinstance(model, SvmModel):
        body = io.StringIO()
        body.write(_hyper_line(model.hyperparams))
        body.write(f"bias: {repr(float(model.bias))}\n")
        body.write(f"gamma: {repr(float(model.gamma))}\n")
        body.write(f"C: {repr(float(model.C))}\n")
        body.write(f"n_support: {model.support_vectors.shape[0]} n_cols: {model.support_vectors.shape[1] if model.support_vectors.size else 0}\n")
        for row, coef in zip(model.support_vectors, model.dual_coef):
            body.write(f"sv: {repr(float(coef))} {_fmt_vector(row)}\n")
        return "svm", body.getvalue()
    if isinstance(model, MlpModel):
        body = io.StringIO()
        body.write(_hyper_line({}))
        body.write(f"sizes: {' '.join(str(s) for s in model.sizes)}\n")
        body.write(f"y_mean: {repr(float(model.y_mean))}\n")
        body.write(f"y_std: {repr(float(model.y_std))}\n")
        for layer, (W, b) in enumerate(zip(model.weights, model.biases)):
            body.write(f"layer {layer} rows {W.shape[0]}\n")
            for row in W:
                body.write(f"w: {_fmt_vector(row)}\n")
            body.write(f"b: {_fmt_vector(b)}\n")
        return "mlp", body.getvalue()
    if isinstance(model, ScalerParams):
        body = io.StringIO()
        body.write(_hyper_line({}))
        body.write(f"mean: {_fmt_vector(model.mean)}\n")
        body.write(f"std: {_fmt_vector(model.std)}\n")
        body.write(f"scaled_mask: {' '.join(str(int(v)) for v in model.scaled_mask)}\n")
        body.write(f"constant_mask: {' '.join(str(int(v)) for v in model.constant_mask)}\n")
        return "scaler", body.getvalue()
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _expect(lines, pos, key):
    if pos >= len(lines) or not lines[pos].startswith(key + ":"):
        raise CorruptFile(f"expected {key!r} at line {pos + 1}")
    return lines[pos].split(":", 1)[1].strip()


def load_model(path, expect_columns=None, expect_hash: str | None = None):
    """Load any saved model; returns ``(model, columns, config_hash)``.

    ``expect_columns`` (ordered names) and ``expect_hash`` guard against
    feeding a model features it was not trained on.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise CorruptFile(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != FORMAT_HEADER:
        raise CorruptFile(f"{path}: not a tweetcast model file")
    if head[1] != f"v{FORMAT_VERSION}":
        raise VersionMismatch(f"{path}: {head[1]} unsupported (want v{FORMAT_VERSION})")
    try:
        family = _expect(lines, 1, "family")
        config_hash = _expect(lines, 2, "config_hash")
        columns_raw = _expect(lines, 3, "columns")
        columns = tuple(c for c in columns_raw.split(",") if c)
        params = _parse_params(_expect(lines, 4, "hyperparams"))
        model = _load_body(family, params, lines, 5)
    except (IndexError, ValueError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    if expect_columns is not None and tuple(expect_columns) != columns:
        raise ColumnListMismatch(f"{path}: model columns do not match the provided feature columns")
    if expect_hash is not None and expect_hash != config_hash:
        raise DataError(f"{path}: config hash mismatch ({config_hash} vs {expect_hash})")
    return model, columns, config_hash


def _load_body(family, params, lines, pos):
    from .linear import LinearModel  # local to avoid confusion with isinstance use above

    if family in ("ols", "ridge", "lasso", "logistic"):
        weights = _parse_vector(_expect(lines, pos, "weights"))
        intercept = float(_expect(lines, pos + 1, "intercept"))
        return LinearModel(weights, intercept, family, params)
    if family == "cart":
        tree, _ = _read_tree(lines, pos)
        return tree
    if family == "forest":
        task = _expect(lines, pos, "task")
        bootstrap = bool(int(_expect(lines, pos + 1, "bootstrap")))
        n_trees = int(_expect(lines, pos + 2, "n_trees"))
        trees = []
        cursor = pos + 3
        for _ in range(n_trees):
            tree, cursor = _read_tree(lines, cursor)
            trees.append(tree)
        return ForestModel(trees, tuple(range(n_trees)), task, params, bootstrap)
    if family == "gbdt":
        init = float(_expect(lines, pos, "init_score"))
        lr = float(_expect(lines, pos + 1, "learning_rate"))
        n_trees = int(_expect(lines, pos + 2, "n_trees"))
        trees = []
        cursor = pos + 3
        for _ in range(n_trees):
            tree, cursor = _read_tree(lines, cursor)
            trees.append(tree)
        return GbdtModel(init, trees, lr, params)
    if family == "knn":
        shape = lines[pos].split()
        n_rows = int(shape[1])
        rows = [
            _parse_vector(_expect(lines, pos + 1 + i, "row")) for i in range(n_rows)
        ]
        labels = np.array([int(v) for v in _expect(lines, pos + 1 + n_rows, "labels").split()])
        return KnnIndex(np.vstack(rows) if rows else np.empty((0, 0)), labels, int(params["k"]))
    if family == "gnb":
        priors = _parse_vector(_expect(lines, pos, "priors"))
        means = np.vstack([
            _parse_vector(_expect(lines, pos + 1, "mean0")),
            _parse_vector(_expect(lines, pos + 2, "mean1")),
        ])
        variances = np.vstack([
            _parse_vector(_expect(lines, pos + 3, "var0")),
            _parse_vector(_expect(lines, pos + 4, "var1")),
        ])
        epsilon = float(_expect(lines, pos + 5, "epsilon"))
        return GnbModel(priors, means, variances, epsilon)
    if family == "svm":
        bias = float(_expect(lines, pos, "bias"))
        gamma = float(_expect(lines, pos + 1, "gamma"))
        C = float(_expect(lines, pos + 2, "C"))
        shape = lines[pos + 3].split()
        n_sv, n_cols = int(shape[1]), int(shape[3])
        vectors = []
        coefs = []
        for i in range(n_sv):
            payload = _expect(lines, pos + 4 + i, "sv").split()
            coefs.append(float(payload[0]))
            vectors.append([float(v) for v in payload[1:]])
        sv = np.array(vectors) if vectors else np.empty((0, n_cols))
        return SvmModel(sv, np.array(coefs), bias, gamma, C, params)
    if family == "mlp":
        sizes = tuple(int(v) for v in _expect(lines, pos, "sizes").split())
        y_mean = float(_expect(lines, pos + 1, "y_mean"))
        y_std = float(_expect(lines, pos + 2, "y_std"))
        cursor = pos + 3
        weights = []
        biases = []
        for layer in range(len(sizes) - 1):
            header = lines[cursor].split()
            rows = int(header[3])
            W = np.vstack([
                _parse_vector(_expect(lines, cursor + 1 + r, "w")) for r in range(rows)
            ])
            b = _parse_vector(_expect(lines, cursor + 1 + rows, "b"))
            weights.append(W)
            biases.append(b)
            cursor += rows + 2
        return MlpModel(sizes, weights, biases, y_mean, y_std)
    if family == "scaler":
        mean = _parse_vector(_expect(lines, pos, "mean"))
        std = _parse_vector(_expect(lines, pos + 1, "std"))
        scaled = np.array([bool(int(v)) for v in _expect(lines, pos + 2, "scaled_mask").split()])
        constant = np.array([bool(int(v)) for v in _expect(lines, pos + 3, "constant_mask").split()])
        return ScalerParams((), mean, std, scaled, constant)
    raise CorruptFile(f"unknown model family {family!r}")


def save_scaler(scaler: ScalerParams, path, config_hash: str = "") -> None:
    save_model(scaler, path, scaler.columns, config_hash)


def load_scaler(path, expect_columns=None, expect_hash=None) -> ScalerParams:
    scaler, columns, _ = load_model(path, expect_columns, expect_hash)
    if not isinstance(scaler, ScalerParams):
        raise CorruptFile(f"{path}: not a scaler file")
    return ScalerParams(columns, scaler.mean, scaler.std, scaler.scaled_mask, scaler.constant_mask)
