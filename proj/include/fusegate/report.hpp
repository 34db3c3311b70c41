#pragma once

#include <string>
#include <vector>

#include "fusegate/experiment.hpp"

namespace fusegate {

// results.json layout: {"format_version", "payload": {...}, "meta": {...}}.
// Every numeric outcome lives under "payload"; wall-clock time and the
// config echo live under "meta" so identical runs produce byte-identical
// payloads.
void write_run_result(const RunResult& result, const ExperimentConfig& config,
                      const std::string& path);
RunResult read_run_result(const std::string& path);

// Serialized payload subtree alone (reproducibility comparisons).
std::string run_result_payload(const std::string& path);

void write_comparison_csv(const ComparisonTable& table,
                          const std::string& path);
ComparisonTable read_comparison_csv(const std::string& path);

// Single-run CSV summary row (same reader).
ComparisonTable single_run_table(const RunResult& result);

// Minimal standalone SVG charts.
void write_loss_svg(const std::vector<std::pair<std::size_t, double>>& trace,
                    const std::string& title, const std::string& path);
void write_accuracy_svg(const std::vector<std::pair<std::string, double>>& bars,
                        const std::string& title, const std::string& path);

// Emits results.json + table.csv + loss.svg + accuracy.svg for one run.
void emit_reports(const RunResult& result, const ExperimentConfig& config,
                  const std::string& dir);

}  // namespace fusegate
