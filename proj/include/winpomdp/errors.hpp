#pragma once

#include <stdexcept>
#include <string>

namespace winpomdp {

struct InvalidArgument : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Conditioning on an observation whose predicted probability is zero.
struct ZeroProbabilityObservation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An exhaustive enumeration would exceed the configured node budget.
struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyDataset : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingEndAction : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularSystem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotDecodable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace winpomdp
