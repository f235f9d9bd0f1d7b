#include "pamtt/digest.hpp"

#include <cstdio>

namespace pamtt {

std::string hex_digest(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

}  // namespace pamtt
