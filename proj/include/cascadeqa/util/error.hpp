#pragma once

#include <stdexcept>
#include <string>

namespace cascadeqa {

// Every library failure derives from Error; kind() lets the CLI map failures
// onto its exit codes without string matching.
enum class ErrorKind {
  Dimension,
  Contract,
  EmptyCandidates,
  EmptyAggregate,
  Parse,
  Data,
  Usage,
  Io,
  Numeric,
  Version,
  NoTrainableData,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CASCADEQA_DEFINE_ERROR(Name, Kind) \
  class Name : public Error {              \
   public:                                 \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

CASCADEQA_DEFINE_ERROR(DimensionError, Dimension)
CASCADEQA_DEFINE_ERROR(ContractError, Contract)
CASCADEQA_DEFINE_ERROR(EmptyCandidateError, EmptyCandidates)
CASCADEQA_DEFINE_ERROR(EmptyAggregateError, EmptyAggregate)
CASCADEQA_DEFINE_ERROR(ParseError, Parse)
CASCADEQA_DEFINE_ERROR(DataError, Data)
CASCADEQA_DEFINE_ERROR(UsageError, Usage)
CASCADEQA_DEFINE_ERROR(IoError, Io)
CASCADEQA_DEFINE_ERROR(NumericError, Numeric)
CASCADEQA_DEFINE_ERROR(VersionError, Version)
CASCADEQA_DEFINE_ERROR(NoTrainableDataError, NoTrainableData)

#undef CASCADEQA_DEFINE_ERROR

}  // namespace cascadeqa
