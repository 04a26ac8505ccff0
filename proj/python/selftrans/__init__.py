# Copyright 2026  The selftrans Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Semi-supervised transcription with noisy-student self-training."""

from ._selftrans import (
    Experiment,
    Model,
    NgramLM,
    ParseError,
    ValidationError,
    Vocabulary,
    augmentation_call_count,
    ctc_loss,
    ctc_min_frames,
    multitask_loss,
    s2s_loss,
    speed_perturb,
    unified_loss,
    word_error_rate,
)

__all__ = [
    "Experiment",
    "Model",
    "NgramLM",
    "ParseError",
    "ValidationError",
    "Vocabulary",
    "augmentation_call_count",
    "ctc_loss",
    "ctc_min_frames",
    "multitask_loss",
    "s2s_loss",
    "speed_perturb",
    "unified_loss",
    "word_error_rate",
]
