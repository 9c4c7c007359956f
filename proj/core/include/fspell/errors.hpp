// Copyright 2026 The fspell Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fspell {

// Base of every error the library throws. Subclasses are tags the callers
// branch on (e.g. the sampler skips InfeasibleTarget).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyAfterNormalization : public Error {
 public:
  explicit EmptyAfterNormalization(const std::string& text)
      : Error("no alphabet character left after normalizing \"" + text + "\"") {}
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTarget : public Error {
 public:
  InfeasibleTarget(int frames, int required)
      : Error("CTC target needs " + std::to_string(required) + " frames, got " +
              std::to_string(frames)),
        frames_(frames),
        required_(required) {}
  int frames() const { return frames_; }
  int required() const { return required_; }

 private:
  int frames_;
  int required_;
};

class NoFeasibleHypothesis : public Error {
 public:
  using Error::Error;
};

class EmptyHypothesisSet : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// Raised by the pipeline; carries the name of the stage that failed so the
// CLI can report it and resume from persisted state.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace fspell
