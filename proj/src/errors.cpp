#include "roughctl/errors.hpp"

namespace roughctl {

void require(bool condition, const char* message) {
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace roughctl
