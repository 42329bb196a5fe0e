#include "sgld/json_util.hpp"

#ifndef SGLD_VERSION
#define SGLD_VERSION "0.0.0"
#endif
#ifndef SGLD_BUILD_ID
#define SGLD_BUILD_ID "unknown"
#endif

namespace sgld {

const char* library_version() { return SGLD_VERSION; }
const char* build_id() { return SGLD_BUILD_ID; }

}  // namespace sgld
