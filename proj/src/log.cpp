#include "zeno/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace zeno {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink_slot() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  sink_slot() = std::move(sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink_slot()) sink_slot()(message);
}

ScopedWarningSink::ScopedWarningSink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  previous_ = std::exchange(sink_slot(), std::move(sink));
}

ScopedWarningSink::~ScopedWarningSink() {
  std::lock_guard lock(sink_mutex());
  sink_slot() = std::move(previous_);
}

}  // namespace zeno
