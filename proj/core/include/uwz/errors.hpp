#pragma once

#include <stdexcept>
#include <string>

namespace uwz {

struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateWeight : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SessionExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TestDegenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CacheMiss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace uwz
