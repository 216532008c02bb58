#include "circa/models/decision.hpp"

namespace circa::models {

ClassLabel decide_class(const ClassProbabilities& probs) {
    ClassLabel best = ClassLabel::Covid;
    for (ClassLabel c : {ClassLabel::Pneumonia, ClassLabel::Normal}) {
        if (probs[c] > probs[best]) best = c;
    }
    return best;
}

}  // namespace circa::models
