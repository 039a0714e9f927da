#pragma once

#include <stdexcept>
#include <string>

namespace gapfill {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad configuration or usage; the CLI exits 1 on these
struct ConfigError : Error {
    using Error::Error;
};

// malformed, missing or out-of-contract data; the CLI exits 2
struct DataError : Error {
    using Error::Error;
};

// non-finite values, divergence; the CLI exits 2
struct NumericError : Error {
    using Error::Error;
};

}  // namespace gapfill
