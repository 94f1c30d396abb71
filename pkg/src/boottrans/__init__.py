"""Execution-verified RL orchestrator for multilingual code translation.

The package is organised around a single loop: portable test suites parsed
from pivot-language scaffolds (``testspec``) are transpiled into runnable
harnesses per target language (``transpiler``), candidate translations are
compiled and executed under resource limits (``sandbox``), verified rollouts
feed a dual-pool curriculum (``pools``), and the weighted group-relative
policy objective is computed over the resulting batches (``rlmath``,
``orchestrator``).  ``policy`` abstracts over the generation backend so the
whole loop runs at desk scale with a scripted policy, and ``evaluator``
scores translation accuracy over the full direction matrix.
"""

__version__ = "0.1.0"
