#include <spdlog/spdlog.h>

namespace {

// Training progress is logged at info; keep test output readable.
const bool kQuiet = [] {
  spdlog::set_level(spdlog::level::warn);
  return true;
}();

}  // namespace
