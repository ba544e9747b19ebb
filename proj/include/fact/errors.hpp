#ifndef FACT_ERRORS_HPP
#define FACT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fact {

/// A test statistic's self-normalizing variance estimate is exactly zero
/// (constant transformed feature or identically-zero residuals). Raised as
/// an error rather than reported as p = 1 so that ill-posed inputs surface.
class DegenerateVariance : public std::runtime_error {
public:
    explicit DegenerateVariance(const std::string& what) : std::runtime_error(what) {}
};

/// The requested inference-sample partition leaves a block with < 2 rows.
class PartitionTooSmall : public std::runtime_error {
public:
    explicit PartitionTooSmall(const std::string& what) : std::runtime_error(what) {}
};

/// Too many rows lack out-of-bag predictions (> 10% with empty tree sets).
class EmptyOob : public std::runtime_error {
public:
    explicit EmptyOob(const std::string& what) : std::runtime_error(what) {}
};

/// A conditional-permutation stratum has too few rows even after merging.
class StrataTooSmall : public std::runtime_error {
public:
    explicit StrataTooSmall(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fact

#endif  // FACT_ERRORS_HPP
