from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from nsk_capillary.config import load_config
from nsk_capillary.oracles import format_table, run_suites
from nsk_capillary.runner import SimulationRunner, run_report
from nsk_capillary.thermo import split_vdw

ROOT = Path(__file__).resolve().parent


def main() -> None:
    config = load_config(ROOT / "configs" / "two_phase.ini")
    config = replace(config, t_end=0.05)
    runner = SimulationRunner(config, persist=False)

    split = split_vdw(runner.law)
    lo, hi = split.spinodal
    print(f"亚稳区: ({lo:.4f}, {hi:.4f}) | P2 在 ρ ≥ {split.rho_bar_split:.4f} 处为 0")

    result = runner.run()
    print(run_report(result))
    drift = runner.ledger.mass_drift()
    momentum = runner.ledger.momentum_drift()
    print(f"质量漂移: {drift:.3e} | 动量漂移: {', '.join(f'{m:.3e}' for m in momentum)}")

    print("\n热力学与截断函数校验:")
    print(format_table(run_suites("thermo") + run_suites("cutoffs")))


if __name__ == "__main__":
    main()
