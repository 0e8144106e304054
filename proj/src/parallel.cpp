#include "evflow/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace evflow {

unsigned thread_count() {
  if (const char* env = std::getenv("EVFLOW_THREADS")) {
    const std::string_view text(env);
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && ptr == text.data() + text.size() && value > 0) return value;
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

}  // namespace evflow
