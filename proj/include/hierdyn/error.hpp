#pragma once

#include <stdexcept>

namespace hierdyn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hierdyn
