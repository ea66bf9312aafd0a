#pragma once

#include <stdexcept>
#include <string>

namespace crowdfuse {

enum class Errc {
  DegeneratePair,    // both operands have zero measure, ratio undefined
  GridMismatch,      // segment rasters disagree on width/height
  EmptyTracks,       // 3d overlap of two tracks without any frames
  EmptyInput,        // an aggregate over zero elements
  CategoryMismatch,  // element or option does not belong to the job category
  AlreadyAggregated, // task left the Open state, no further consensus steps
  NotAggregated,     // purge requires a previously aggregated task
  NotSubmitted,      // settlement requires a submitted assignment
  NoEligibleTasks,   // selection pool is empty for this worker
  OverlapMismatch,   // consecutive chunks do not share the declared frames
  SchemaError,       // malformed or incomplete JSON input
  BadArgument,       // invalid option value
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const { return code_; }

private:
  Errc code_;
};

} // namespace crowdfuse
