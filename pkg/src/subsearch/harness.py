"""Experiment orchestration: config loading, the end-to-end pipeline
(init -> project -> optimize), metrics, ablation sweeps, trace emission,
and the external-objective subprocess bridge.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import shlex
import subprocess
import threading
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import cmaes
from .errors import ConfigError, EvaluationError, ProtocolError
from .initialization import InitConfig, conditioned_init, random_token_init
from .numerics import RngStream, cosine_similarity, stream_id
from .objectives import (NoiseKey, Objective, SurrogateObjective,
                         benchmark_objective, build_vocabulary, check_finite,
                         generate_scene)
from .subspace import (PriorNormSpec, build_pca_projection,
                       build_prior_norm_projection, build_random_projection,
                       identity_projection)

SWEEP_DIMS = (64, 256, 512)


# ---------------------------------------------------------------------------
# configuration


def _from_dict(cls, data: dict, context: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{context}: unknown key(s) {sorted(unknown)}")
    return cls(**data)


@dataclass
class ObjectiveSpec:
    kind: str = "surrogate"          # surrogate | benchmark | external
    name: str = "sphere"             # benchmark function
    intrinsic_dim: int = 8
    ambient_dim: int = 256
    command: str = ""                # external child command line
    dim: int = 0                     # external embedding dimension
    timeout: float = 30.0


@dataclass
class VocabSpec:
    size: int = 1000
    dim: int = 256
    structure: str = "clustered"
    clusters: int = 8
    entry_std: float = 0.05
    center_std: float = 1.0
    jitter: float = 0.02


@dataclass
class SceneSpec:
    images: int = 5
    eta: float = 0.01
    concept: str = "token-mixture"
    mixture_size: int = 3


@dataclass
class InitSpec:
    mode: str = "conditioned"        # conditioned | random-token
    template: str = "photo-of"
    temperature: float = 0.05


@dataclass
class ProjectionSpec:
    kind: str = "prior-norm"         # pca | prior-norm | random-n01 | random-n01-over-d | identity
    d: int = 256
    lam: float = 1.0


@dataclass
class CmaSpec:
    popsize: int = 30
    sigma0: float = 0.5
    budget: int = 13000


@dataclass
class RunConfig:
    seed: int = 0
    tokens: int = 1
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    vocab: VocabSpec = field(default_factory=VocabSpec)
    scene: SceneSpec = field(default_factory=SceneSpec)
    init: InitSpec = field(default_factory=InitSpec)
    projection: ProjectionSpec = field(default_factory=ProjectionSpec)
    cma: CmaSpec = field(default_factory=CmaSpec)
    noise_policy: str = "per-generation"
    eval_batch: int = 20
    target: float | None = None
    out_dir: str | None = None
    timing: str = "deterministic"    # deterministic | wallclock

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        nested = {"objective": ObjectiveSpec, "vocab": VocabSpec,
                  "scene": SceneSpec, "init": InitSpec,
                  "projection": ProjectionSpec, "cma": CmaSpec}
        kwargs = {}
        for key, sub in nested.items():
            if key in data:
                kwargs[key] = _from_dict(sub, data.pop(key), key)
        cfg = _from_dict(cls, data, "config")
        for key, value in kwargs.items():
            setattr(cfg, key, value)
        cfg.validate()
        return cfg

    def validate(self):
        if self.tokens not in (1, 2, 3):
            raise ConfigError(f"config: tokens must be in 1..3, got {self.tokens}")
        if self.noise_policy not in ("per-generation", "pinned-global"):
            raise ConfigError(f"config: unknown noise policy {self.noise_policy!r}")
        if self.timing not in ("deterministic", "wallclock"):
            raise ConfigError(f"config: unknown timing mode {self.timing!r}")
        if self.cma.popsize < 4:
            raise ConfigError("config: cma.popsize must be >= 4")
        if self.projection.d not in SWEEP_DIMS and self.projection.kind != "identity":
            warnings.warn(f"projection.d={self.projection.d} outside the "
                          f"standard sweep set {SWEEP_DIMS}; using it anyway")

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    if not text.strip():
        return RunConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}: {err.msg}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level value must be an object")
    return RunConfig.from_dict(data)


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# trace emission

_TRACE_FIELDS = ("gen", "evals", "f_best_gen", "f_star", "sigma", "m_norm",
                 "c_cond", "ms")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def emit_trace(records, path: str):
    """One JSON object per line; floats carry 17 significant digits."""
    lines = []
    for rec in records:
        if not isinstance(rec, dict):
            rec = asdict(rec)
        body = ",".join(f'"{name}":{_fmt(rec[name])}' for name in _TRACE_FIELDS)
        lines.append("{" + body + "}")
    try:
        with open(path, "w") as fh:
            for line in lines:
                fh.write(line + "\n")
    except OSError as err:
        raise OSError(f"emit_trace: cannot write {path}: {err}") from err


def evals_to_reach(trace, level: float):
    """First evaluation count at which f_star <= level, or None."""
    for rec in trace:
        f_star = rec.f_star if hasattr(rec, "f_star") else rec["f_star"]
        if f_star <= level:
            return rec.evals if hasattr(rec, "evals") else rec["evals"]
    return None


# ---------------------------------------------------------------------------
# external objective bridge


class ExternalObjective(Objective):
    """Line-protocol bridge to a child process evaluating candidates.

    One request/response pair in flight: the request carries the whole
    candidate batch plus the generation's noise key, the child echoes the id
    and returns one fitness per candidate.
    """

    def __init__(self, command: str, dim: int, timeout: float = 30.0):
        self.command = command
        self.dim = dim
        self.timeout = timeout
        self._proc = None
        self._lines = None
        self._next_id = 0

    def _ensure_child(self):
        if self._proc is not None:
            return
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.command), stdin=subprocess.PIPE,
                stdout=subprocess.PIPE, text=True, bufsize=1)
        except OSError as err:
            raise ProtocolError(f"external objective: cannot spawn "
                                f"{self.command!r}: {err}") from err
        self._lines = queue.Queue()

        def pump(stream, sink):
            for line in stream:
                sink.put(line)
            sink.put(None)

        threading.Thread(target=pump, args=(self._proc.stdout, self._lines),
                         daemon=True).start()

    def batch_evaluate(self, embeddings, key: NoiseKey):
        self._ensure_child()
        req_id = self._next_id
        self._next_id += 1
        request = {
            "id": req_id,
            "dim": self.dim,
            "noise_key": {"t_seed": key.t_seed, "eps_seed": key.eps_seed},
            "candidates": [np.asarray(e, dtype=float).tolist() for e in embeddings],
        }
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise ProtocolError(f"external objective: child died while writing "
                                f"(exit={self._proc.poll()})") from err
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ProtocolError(f"external objective: no response within "
                                f"{self.timeout}s") from None
        if line is None:
            raise ProtocolError(f"external objective: child closed its output "
                                f"(exit={self._proc.poll()})")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as err:
            raise ProtocolError(f"external objective: malformed response "
                                f"{line!r}: {err.msg}") from err
        if response.get("id") != req_id:
            raise ProtocolError(f"external objective: id mismatch "
                                f"(sent {req_id}, got {response.get('id')!r})")
        fitness = response.get("fitness")
        if not isinstance(fitness, list) or len(fitness) != len(embeddings):
            raise ProtocolError(f"external objective: expected {len(embeddings)} "
                                f"fitness values, got {fitness!r}")
        check_finite(fitness, "external objective")
        return [float(v) for v in fitness]

    def evaluate(self, e, key: NoiseKey) -> float:
        return self.batch_evaluate([e], key)[0]

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.wait(timeout=5)
            self._proc = None


def external_objective(command: str, dim: int, timeout: float = 30.0) -> ExternalObjective:
    return ExternalObjective(command, dim, timeout)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class RunReport:
    f_star: float
    evals_to_target: int | None
    reconstruction_cosine: float | None
    config_hash: str
    trace_path: str | None
    trace: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"f_star": self.f_star, "evals_to_target": self.evals_to_target,
                "reconstruction_cosine": self.reconstruction_cosine,
                "config_hash": self.config_hash, "trace_path": self.trace_path}


def _build_objective(config: RunConfig):
    """Returns (objective, e0, scene-or-None) for the configured run."""
    seed = config.seed
    if config.objective.kind == "benchmark":
        spec = config.objective
        obj = benchmark_objective(spec.name, spec.intrinsic_dim,
                                  spec.ambient_dim, seed)
        e0 = RngStream(seed, stream_id("bench-start")).normal(spec.ambient_dim)
        return obj, e0, None
    if config.objective.kind == "external":
        spec = config.objective
        if not spec.command or spec.dim < 1:
            raise ConfigError("config: external objective needs command and dim")
        obj = external_objective(spec.command, spec.dim, spec.timeout)
        e0 = np.zeros(spec.dim)
        return obj, e0, None
    if config.objective.kind != "surrogate":
        raise ConfigError(f"config: unknown objective kind {config.objective.kind!r}")

    v = config.vocab
    vocab = build_vocabulary(seed, v.size, v.dim, v.structure, v.entry_std,
                             v.clusters, v.center_std, v.jitter)
    s = config.scene
    scene = generate_scene(seed, vocab, s.images, s.eta, s.concept,
                           config.tokens, s.mixture_size)
    obj = SurrogateObjective(scene, config.eval_batch)

    mode = config.init.mode
    if mode == "conditioned":
        cfg = InitConfig(template=config.init.template,
                         temperature=config.init.temperature, mode="conditioned")
        e0 = conditioned_init(scene, vocab, cfg, seed)
    elif mode == "random-token":
        e0 = random_token_init(vocab, seed, config.tokens)
    else:
        raise ConfigError(f"config: unknown init mode {mode!r}")
    return obj, e0, (scene, vocab)


def _build_projection(config: RunConfig, vocab, D: int):
    p = config.projection
    if p.kind == "identity":
        return identity_projection(D)
    if p.kind == "pca":
        if vocab is None:
            raise ConfigError("config: pca projection needs a vocabulary "
                              "(surrogate objective)")
        return build_pca_projection(vocab, p.d)
    if p.kind == "prior-norm":
        sigma_e = vocab.sigma_e if vocab is not None else 1.0
        spec = PriorNormSpec(lam=p.lam, sigma_e=sigma_e,
                             sigma_q=config.cma.sigma0, d=p.d)
        return build_prior_norm_projection(spec, D, config.seed)
    if p.kind in ("random-n01", "random-n01-over-d"):
        variant = "n01" if p.kind == "random-n01" else "n01-over-d"
        return build_random_projection(D, p.d, variant, config.seed)
    raise ConfigError(f"config: unknown projection kind {p.kind!r}")


def run_experiment(config: RunConfig) -> RunReport:
    objective, e0, scene_vocab = _build_objective(config)
    scene, vocab = scene_vocab if scene_vocab is not None else (None, None)
    D = np.atleast_2d(np.asarray(e0)).shape[1]
    proj = _build_projection(config, vocab, D)
    d_total = config.tokens * proj.d if config.tokens > 1 else proj.d
    params = cmaes.default_params(d_total, config.cma.popsize, config.cma.sigma0)
    rng = RngStream(config.seed, stream_id("cma"))
    try:
        q_star, e_star, trace = cmaes.optimize(
            objective, e0, proj, params, config.cma.budget,
            config.noise_policy, rng, wallclock=config.timing == "wallclock")
    finally:
        objective.close()

    f_star = trace[-1].f_star
    cosine = None
    optimum = objective.known_optimum()
    if optimum is not None:
        found = np.asarray(e_star).ravel()
        if np.linalg.norm(found) > 0 and np.linalg.norm(optimum) > 0:
            cosine = cosine_similarity(found, optimum)
    target = config.target
    hit = evals_to_reach(trace, target) if target is not None else None

    trace_path = None
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        tag = config_hash(config)
        trace_path = os.path.join(config.out_dir, f"trace-{tag}.jsonl")
        emit_trace(trace, trace_path)
        report_path = os.path.join(config.out_dir, f"report-{tag}.json")
        report = RunReport(f_star, hit, cosine, tag, trace_path, trace)
        with open(report_path, "w") as fh:
            json.dump(report.to_json(), fh, indent=2)
        return report
    return RunReport(f_star, hit, cosine, config_hash(config), None, trace)


AXES = {
    "projection": ("projection", "kind",
                   ["pca", "prior-norm", "random-n01", "random-n01-over-d"]),
    "d": ("projection", "d", list(SWEEP_DIMS)),
    "tokens": (None, "tokens", [1, 2, 3]),
    "init": ("init", "mode", ["conditioned", "random-token"]),
}


def run_sweep(config: RunConfig, axis: str, values=None) -> dict:
    """One report per axis value with shared seeds (paired comparison).

    Per-run failures are recorded as the raised exception, and the sweep
    continues.
    """
    if axis not in AXES:
        raise ConfigError(f"run_sweep: unknown axis {axis!r}")
    section, name, defaults = AXES[axis]
    values = defaults if values is None else values
    results = {}
    for value in values:
        variant = RunConfig.from_dict(config.to_dict())
        holder = variant if section is None else getattr(variant, section)
        setattr(holder, name, value)
        try:
            results[value] = run_experiment(variant)
        except (ValueError, EvaluationError, ProtocolError) as err:
            results[value] = err
    return results
