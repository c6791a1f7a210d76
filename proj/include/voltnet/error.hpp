/*
 * Copyright 2026 The voltnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace voltnet {

/// Violated precondition or malformed input. Maps to CLI exit code 1.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Feeder line set is not a tree rooted at the substation.
class TopologyError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Trace CSV could not be ingested. `row()` is 1-based and counts the header.
class IngestError : public ContractError {
 public:
  IngestError(std::size_t row, const std::string& what)
      : ContractError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Model file does not match the expected architecture or format version.
class ArchMismatchError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Training or dual ascent blew up. Maps to CLI exit code 2.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace voltnet
