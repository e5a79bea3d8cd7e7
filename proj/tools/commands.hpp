#pragma once

#include "config.hpp"

namespace eegattr::cli {

/// Each command reads and writes files only; errors propagate as exceptions.
void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_attribute(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);
void cmd_render(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);

}  // namespace eegattr::cli
