#pragma once

#include "circa/classes.hpp"

namespace circa::models {

/// Maximum-probability class; exact ties go to covid, then pneumonia, then normal.
ClassLabel decide_class(const ClassProbabilities& probs);

}  // namespace circa::models
