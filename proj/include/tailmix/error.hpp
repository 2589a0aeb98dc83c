#pragma once
#include <stdexcept>
#include <string>

namespace tailmix {

// Base for every error the library throws. The CLI maps ConfigError and
// ParseError to exit code 1, everything else to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct PartitionError : Error { using Error::Error; };
struct SplitError : Error { using Error::Error; };
struct StrategyError : Error { using Error::Error; };
struct MetricError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };
struct InitError : Error { using Error::Error; };
struct LoadError : Error { using Error::Error; };

} // namespace tailmix
