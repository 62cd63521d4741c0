// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fbsd {

enum class ErrorKind {
    Validation,
    Io,
    Parse,
    SchemaMismatch,
    MsaLabelInFbsDataset,
    NotAnAttackTrace,
    UnregisteredAttack,
    ClassTooSmall,
    ShapeMismatch,
    AllMasked,
    EmptyTrainingSet,
    UntrainedModel,
    EmptyInput,
    MissingClass,
    UnknownAttack,
    LabelSpaceMismatch,
    LengthMismatch,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace fbsd
