#pragma once

#include <stdexcept>
#include <string>

namespace epigen
{

/// Raised by every module on a violated precondition or a failed numerical step.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace epigen
