#include "mkprice/errors.hpp"

namespace mkprice {

void require(bool condition, const std::string& message) {
    if (!condition) {
        throw InputError(message);
    }
}

}  // namespace mkprice
