#pragma once

#include <functional>
#include <string>

namespace zeno {

/// Receives diagnostic warnings (truncation tail mass, integrator drift).
/// The default sink writes to stderr.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

/// Restores the previous sink on destruction. Used by tests to capture output.
class ScopedWarningSink {
 public:
  explicit ScopedWarningSink(WarningSink sink);
  ~ScopedWarningSink();
  ScopedWarningSink(const ScopedWarningSink&) = delete;
  ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

 private:
  WarningSink previous_;
};

}  // namespace zeno
