// Copyright 2026 The protovote Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace protovote {

/// Malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Matrix and label files share no sample ids.
class AlignmentError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A value outside the domain of an operation (negative counts, NaN inputs).
class DomainError : public std::domain_error {
    using std::domain_error::domain_error;
};

/// Degenerate sample or leaf (zero library size, H + lambda == 0).
class DegenerateError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A filter removed every feature.
class EmptyResultError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A class required by the operation has no samples.
class MissingClassError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A metric that is not defined for the given input (e.g. AUC with one class).
class UndefinedMetricError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Voters or run configuration disagree with each other.
class ConfigurationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Requested moments admit no joint distribution, or a prototype placement is impossible.
class InfeasibleError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A fitted transform is about to be applied to rows it was fitted on.
class LeakageError : public std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace protovote
