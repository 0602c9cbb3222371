# Copyright 2026 The dpsc Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Differentially private coordination of heat and electricity markets."""

from dpsc._dpsc import (
    Case,
    Error,
    FidelityError,
    InfeasibleError,
    ParseError,
    PrivacyParams,
    SolverError,
    ValidationError,
    clear,
    cost_of_privacy,
    error_bound,
    laplace_from_uniform,
    load_case,
    obfuscate,
    parse_case,
    run_ppsm,
    solve_lp,
    stress_sweep,
    synth_case,
    table1,
)

__version__ = "0.1.0"

__all__ = [
    "Case",
    "Error",
    "FidelityError",
    "InfeasibleError",
    "ParseError",
    "PrivacyParams",
    "SolverError",
    "ValidationError",
    "clear",
    "cost_of_privacy",
    "error_bound",
    "laplace_from_uniform",
    "load_case",
    "obfuscate",
    "parse_case",
    "run_ppsm",
    "solve_lp",
    "stress_sweep",
    "synth_case",
    "table1",
]
