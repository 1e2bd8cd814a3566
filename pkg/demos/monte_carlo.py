"""Random 30-unit layouts: mean latency per device mix and layer cap.

Uses 20 trials to stay quick; the CLI equivalent with the default 100 trials is
    layerplace bench --mix 10-90,50-50,90-10 --paper-compat --format markdown
"""

from layerplace import PAPER_COMPAT
from layerplace.harness import ExperimentConfig, emit_report, run_experiment

config = ExperimentConfig(mixes=("10-90", "50-50", "90-10"), conventions=PAPER_COMPAT, trials=20, seed=1)
print(emit_report(run_experiment(config), "markdown"))
