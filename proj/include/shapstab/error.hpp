/*
 * Copyright 2026 The shapstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace shapstab {

// Every library failure derives from Error so callers can catch one type and
// still branch on the concrete category when they need to.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SHAPSTAB_DEFINE_ERROR(Name)    \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

// dataset
SHAPSTAB_DEFINE_ERROR(SchemaError);
SHAPSTAB_DEFINE_ERROR(ParseError);
SHAPSTAB_DEFINE_ERROR(IntegrityError);
SHAPSTAB_DEFINE_ERROR(ValidationError);
SHAPSTAB_DEFINE_ERROR(EncodingError);
SHAPSTAB_DEFINE_ERROR(DegenerateSplitError);

// gbdt / treeshap
SHAPSTAB_DEFINE_ERROR(ConfigError);
SHAPSTAB_DEFINE_ERROR(TrainingError);
SHAPSTAB_DEFINE_ERROR(DataError);
SHAPSTAB_DEFINE_ERROR(DimensionError);
SHAPSTAB_DEFINE_ERROR(ModelIntegrityError);
SHAPSTAB_DEFINE_ERROR(OracleLimitError);

// metrics / stability
SHAPSTAB_DEFINE_ERROR(UndefinedMetricError);
SHAPSTAB_DEFINE_ERROR(AlignmentError);
SHAPSTAB_DEFINE_ERROR(UndefinedStatisticError);

// harness
SHAPSTAB_DEFINE_ERROR(RunFailure);
SHAPSTAB_DEFINE_ERROR(IoError);

#undef SHAPSTAB_DEFINE_ERROR

}  // namespace shapstab
