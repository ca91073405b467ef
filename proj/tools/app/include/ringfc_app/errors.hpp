#pragma once

#include "ringfc/errors.hpp"

namespace ringfc::app {

// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

enum ExitCode : int { ok = 0, other = 1, validation = 2, convergence = 3, io = 4 };

int exit_code_for(const std::exception& e);

} // namespace ringfc::app
