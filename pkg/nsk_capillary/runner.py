from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from .config import dump_config
from .diagnostics import EnergyLedger, ledger_columns
from .errors import BlowUpError
from .kernel import build_kernel
from .models import LedgerRecord, RunConfig, State
from .snapshots import LedgerWriter, output_root, write_state
from .solver import PhysParams, advance, cfl_dt, project_vacuum
from .scenarios import generate_initial
from .thermo import VanDerWaalsLaw, build_pressure_law, split_vdw

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    final: State
    records: List[LedgerRecord]
    steps: int
    out_dir: Optional[Path] = None
    ledger_path: Optional[Path] = None
    snapshots: List[Path] = field(default_factory=list)
    clamped_steps: int = 0


class SimulationRunner:
    def __init__(self, config: RunConfig, out_dir: Optional[Path] = None, persist: bool = True) -> None:
        self.config = config
        self.grid = config.grid
        self.law = build_pressure_law(config.pressure)
        self.kernel = build_kernel(config.kernel, self.grid)
        initial = generate_initial(config.scenario, self.grid, self.law)
        rho_scale = float(np.mean(initial.rho.values)) or 1.0
        self.params = PhysParams.from_spec(config.physics, self.law, self.kernel, rho_scale)
        self.initial = project_vacuum(initial, self.params.eps_vac)
        self.ledger = EnergyLedger(self.params, config.diagnostics, gamma=config.pressure.gamma, a=config.pressure.a)
        self.persist = persist
        self.out_dir = Path(out_dir) if out_dir is not None else output_root(config.output)

    def _plan(self) -> Tuple[Optional[float], int]:
        """Fixed dt with its step count, or (None, 0) for CFL-driven stepping."""
        dt = self.config.dt
        t_end = self.config.t_end
        if dt is None or t_end == 0:
            return None, 0
        steps = max(1, int(round(t_end / dt)))
        fixed = t_end / steps
        if not math.isclose(fixed, dt, rel_tol=1e-9):
            logger.info("fixed dt %.6g adjusted to %.6g to land on t_end", dt, fixed)
        cfl = cfl_dt(self.initial, self.params, 1.0)
        if fixed > self.config.c_cfl * cfl:
            logger.warning("fixed dt %.6g exceeds the CFL estimate %.6g; using it as given", fixed, self.config.c_cfl * cfl)
        return fixed, steps

    def run(self, on_record: Optional[Callable[[LedgerRecord], None]] = None) -> RunResult:
        config = self.config
        out = config.output
        state = self.initial
        result = RunResult(final=state, records=self.ledger.records, steps=0)

        writer = None
        if self.persist:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            (self.out_dir / "config.ini").write_text(dump_config(config), encoding="utf-8")
            if isinstance(self.law, VanDerWaalsLaw) and self.law.spinodal() is not None:
                split_vdw(self.law).write_csv(self.out_dir / "pressure_split.csv")
            result.out_dir = self.out_dir
            result.ledger_path = self.out_dir / out.ledger_name
            extras = self.ledger.extra_columns(self.grid.dim)
            writer = LedgerWriter(result.ledger_path, ledger_columns(self.grid.dim), extras)

        logger.info(
            "run %s: %s law, %s kernel, %s, t_end=%.6g",
            config.scenario.name, self.law.family, self.kernel.shape, self.grid, config.t_end,
        )
        t_end = config.t_end
        step = 0
        try:
            self._publish(self.ledger.observe(state), writer, on_record)
            self._snapshot(state, step, result)
            fixed_dt, fixed_steps = self._plan()
            while True:
                if fixed_dt is not None:
                    if step >= fixed_steps:
                        break
                    dt = fixed_dt
                else:
                    remaining = t_end - state.t
                    if remaining <= 1e-12 * max(t_end, 1.0):
                        break
                    dt = min(cfl_dt(state, self.params, config.c_cfl), remaining)
                try:
                    report = advance(state, self.params, dt)
                except BlowUpError as exc:
                    self._write_last_good(state, step, result)
                    raise BlowUpError(exc.quantity, exc.cell, exc.t, step + 1) from exc
                step += 1
                state = report.state
                if fixed_dt is not None:
                    last = step == fixed_steps
                    if last:
                        state = State(t_end, state.rho, state.m)
                else:
                    last = t_end - state.t <= 1e-12 * max(t_end, 1.0)
                if report.clamped_cells:
                    if result.clamped_steps == 0:
                        logger.warning("vacuum floor reached at t=%.6g: %d cells clamped", state.t, report.clamped_cells)
                    result.clamped_steps += 1
                keep = last or step % out.ledger_every == 0
                record = self.ledger.observe(state, report.vacuum_mass, report.vacuum_momentum, keep=keep)
                self._publish(record, writer, on_record)
                if out.snapshot_every and (step % out.snapshot_every == 0 or last):
                    self._snapshot(state, step, result)
        finally:
            if writer is not None:
                writer.close()

        result.final = state
        result.steps = step
        logger.info(
            "run %s finished: %d steps, mass drift %.3e, vacuum correction %.3e",
            config.scenario.name, step, self.ledger.mass_drift(), self.ledger.vacuum_cum,
        )
        return result

    def _publish(self, record: Optional[LedgerRecord], writer: Optional[LedgerWriter],
                 on_record: Optional[Callable[[LedgerRecord], None]]) -> None:
        if record is None:
            return
        if writer is not None:
            writer.write(record)
        if on_record is not None:
            on_record(record)
        logger.debug("t=%.6g E=%.10g E+D=%.10g", record.t, record.energy, record.residual)

    def _snapshot(self, state: State, step: int, result: RunResult) -> None:
        out = self.config.output
        if self.persist and out.snapshot_every:
            result.snapshots.append(write_state(self.out_dir, state, step, out.snapshot_format))

    def _write_last_good(self, state: State, step: int, result: RunResult) -> None:
        if not self.persist:
            return
        path = write_state(self.out_dir, state, step, "bin")
        result.snapshots.append(path)
        logger.error("blow-up after step %d; last good state written to %s", step, path)


def run(config: RunConfig, out_dir: Optional[Path] = None, persist: bool = True) -> RunResult:
    return SimulationRunner(config, out_dir=out_dir, persist=persist).run()


def run_report(result: RunResult) -> str:
    records = result.records
    lines = [f"运行结束: t={result.final.t:.6g}, 步数 {result.steps}"]
    if records:
        first, last = records[0], records[-1]
        lines.append(f"质量: {first.mass:.12g} -> {last.mass:.12g} (真空修正 {last.vacuum_cum:.3e})")
        lines.append(f"能量: {first.energy:.12g} -> {last.energy:.12g}")
        lines.append(f"累计耗散: {last.dissipation_cum:.6g} | 能量残差: {last.residual - first.energy:.3e}")
    if result.ledger_path:
        lines.append(f"账本: {result.ledger_path}")
    if result.snapshots:
        lines.append(f"快照: {len(result.snapshots)} 个")
    return "\n".join(lines)
