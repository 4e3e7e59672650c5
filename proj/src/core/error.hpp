#ifndef SMPC_CORE_ERROR_HPP_
#define SMPC_CORE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace smpc {

/// Exception carrying a stable machine-readable code next to the message.
/// Codes are lower_snake_case and surface unchanged in CLI error JSON.
class Error : public std::runtime_error
{
public:
  Error(std::string code, const std::string & message)
      : std::runtime_error(message), code_(std::move(code))
  {}

  const std::string & code() const noexcept { return code_; }

private:
  std::string code_;
};

}  // namespace smpc

#endif  // SMPC_CORE_ERROR_HPP_
