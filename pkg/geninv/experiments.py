"""Monte-Carlo harness: NFL sweeps over dimension p for several concentrations c."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import SingularGramError, ValidationError
from .frobenius import asymptotic_nfl, frobenius_report
from .logger import write_csv
from .matrixlab import Scenario, build_inverse_pair, sample_noise
from .protocol import Noise
from .spectrum import SpectrumSpec, figure1_spectrum

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("c_target", "p", "mean_nfl", "sd_nfl", "nfl_asym", "n_ok", "n_failed")


@dataclass
class SweepConfig:
    c_list: List[float]
    p_grid: List[int]
    replications: int
    spectrum: SpectrumSpec
    noise: Noise = Noise.GAUSSIAN
    master_seed: int = 0
    output_path: Optional[str] = None

    def __post_init__(self):
        if not self.c_list:
            raise ValidationError("c_list is empty")
        for c in self.c_list:
            if not (math.isfinite(c) and c > 1):
                raise ValidationError(f"every concentration must be > 1, got {c}")
        if len(set(self.c_list)) != len(self.c_list):
            raise ValidationError(f"c_list has duplicate concentrations: {self.c_list}")
        if not self.p_grid:
            raise ValidationError("p_grid is empty")
        if any(b <= a for a, b in zip(self.p_grid, self.p_grid[1:])):
            raise ValidationError(f"p_grid must be strictly ascending: {self.p_grid}")
        if self.replications < 1:
            raise ValidationError(f"replications must be >= 1, got {self.replications}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.master_seed}")
        self.noise = self.noise if isinstance(self.noise, Noise) else Noise.parse(self.noise)

    def cells(self) -> List[Tuple[int, float, int]]:
        return [(ci, c, p) for ci, c in enumerate(self.c_list) for p in self.p_grid]


@dataclass
class ResultRow:
    c_target: float
    c_eff: float
    p: int
    n: int
    replicate: int
    seed: int
    fro_plus_emp: float
    fro_minus_emp: float
    nfl_emp: float
    nfl_asym: float
    trace_minus_emp: float
    precision_estimate: float

    @classmethod
    def header(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple:
        return astuple(self)


@dataclass
class CellSummary:
    c_target: float
    p: int
    mean_nfl: float
    sd_nfl: float
    nfl_asym: float
    n_ok: int
    n_failed: int


@dataclass
class SweepResult:
    rows: List[ResultRow]
    summaries: List[CellSummary]
    failures: Dict[Tuple[float, int], int] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(self.failures.values())


def replication_seed(master_seed: int, c_index: int, p: int, replicate: int) -> int:
    """Stable 64-bit seed, independent of the order replications run in."""
    seq = np.random.SeedSequence([master_seed, c_index, p, replicate])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def retry_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1, dtype=np.uint64)[0])


def run_replication(scenario: Scenario, replicate: int = 0) -> ResultRow:
    """
    One draw of X, then Y, S, S+, S- and every ResultRow field. A singular
    Gram matrix is retried once with a derived sub-seed before giving up.
    """
    model = scenario.covariance()
    seed = scenario.seed
    try:
        X = sample_noise(scenario.p, scenario.n, scenario.noise, seed)
        pair = build_inverse_pair(model, X)
    except SingularGramError as e:
        seed = retry_seed(scenario.seed)
        logger.warning("p=%d c=%g replicate %d: %s; retrying with seed %d",
                       scenario.p, scenario.c, replicate, e, seed)
        X = sample_noise(scenario.p, scenario.n, scenario.noise, seed)
        pair = build_inverse_pair(model, X)

    report = frobenius_report(pair, scenario.spectrum)
    return ResultRow(
        c_target=scenario.c,
        c_eff=report.c_eff,
        p=scenario.p,
        n=scenario.n,
        replicate=replicate,
        seed=seed,
        fro_plus_emp=report.fro_plus_emp,
        fro_minus_emp=report.fro_minus_emp,
        nfl_emp=report.nfl_emp,
        nfl_asym=report.nfl_asym,
        trace_minus_emp=report.trace_minus_emp,
        precision_estimate=report.precision_norm_estimate,
    )


def _attempt(job) -> Optional[ResultRow]:
    scenario, replicate = job
    try:
        return run_replication(scenario, replicate)
    except SingularGramError as e:
        logger.warning("p=%d c=%g replicate %d failed twice: %s", scenario.p, scenario.c, replicate, e)
        return None


def summarize(rows: Sequence[ResultRow], config: SweepConfig,
              failures: Dict[Tuple[float, int], int]) -> List[CellSummary]:
    by_cell: Dict[Tuple[float, int], List[ResultRow]] = {}
    for row in rows:
        by_cell.setdefault((row.c_target, row.p), []).append(row)

    summaries = []
    for _, c, p in config.cells():
        cell = by_cell.get((c, p), [])
        nfl = np.array([r.nfl_emp for r in cell])
        if cell:
            nfl_asym = cell[0].nfl_asym
        else:
            n = max(1, int(round(p / c)))
            nfl_asym = asymptotic_nfl(p / n, config.spectrum)
        summaries.append(CellSummary(
            c_target=c,
            p=p,
            mean_nfl=float(nfl.mean()) if nfl.size else float("nan"),
            sd_nfl=float(nfl.std(ddof=1)) if nfl.size > 1 else float("nan"),
            nfl_asym=nfl_asym,
            n_ok=len(cell),
            n_failed=failures.get((c, p), 0),
        ))
    return summaries


def run_sweep(config: SweepConfig, threads: int = 1) -> SweepResult:
    """
    Every (c, p, replicate) in the grid. Rows come back in (c, p, replicate)
    order whatever the thread count; results are persisted when the config
    names an output path.
    """
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    jobs = []
    for ci, c, p in config.cells():
        for r in range(config.replications):
            seed = replication_seed(config.master_seed, ci, p, r)
            jobs.append((Scenario(p=p, c=c, spectrum=config.spectrum, noise=config.noise, seed=seed), r))

    logger.info("running %d replications on %d thread(s)", len(jobs), threads)
    if threads == 1:
        outcomes = [_attempt(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_attempt, jobs))

    rows = []
    failures: Dict[Tuple[float, int], int] = {}
    for (scenario, _), row in zip(jobs, outcomes):
        if row is None:
            key = (scenario.c, scenario.p)
            failures[key] = failures.get(key, 0) + 1
        else:
            rows.append(row)

    result = SweepResult(rows=rows, summaries=summarize(rows, config, failures), failures=failures)
    if config.output_path:
        write_results(result, config.output_path)
    return result


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_summary{path.suffix or '.csv'}")


def write_results(result: SweepResult, path) -> Tuple[Path, Path]:
    """Rows CSV at `path`, per-cell summary CSV alongside it."""
    path = Path(path)
    write_csv(path, ResultRow.header(), (row.values() for row in result.rows))
    spath = summary_path(path)
    write_csv(spath, SUMMARY_HEADER, (astuple(s) for s in result.summaries))
    logger.info("wrote %d rows to %s and %d cells to %s",
                len(result.rows), path, len(result.summaries), spath)
    return path, spath


def figure1_preset(replications: int = 100, master_seed: int = 0,
                   output_path: Optional[str] = None, noise: Noise = Noise.GAUSSIAN) -> SweepConfig:
    """Spectrum {0.2:1, 0.4:3, 0.4:10}, c in {1.07, 2, 10}, p = 50, 100, ..., 500."""
    return SweepConfig(
        c_list=[1.07, 2.0, 10.0],
        p_grid=list(range(50, 501, 50)),
        replications=replications,
        spectrum=figure1_spectrum(),
        noise=noise,
        master_seed=master_seed,
        output_path=output_path,
    )
