#pragma once
// Per-round metric rows and their frozen CSV encoding. Column order and
// number formatting are part of the output contract: a (config, seed) pair
// must replay to byte-identical bytes.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fedsim::trace {

struct RoundTrace {
  int t = 0;
  double loss_weighted = 0.0;
  double loss_union = 0.0;
  double gap_weighted = 0.0;  // NaN for tasks without a closed-form optimum
  double gap_union = 0.0;
  double grad_norm = 0.0;
  double eps_round = 0.0;
  int noise_mode = 0;   // 1: artificial+channel, 0: channel only
  int t_th = -1;        // switch round once known, else -1
  int selected_count = 0;
  std::vector<double> eps_device;
  std::vector<double> sigma_device;
  std::vector<double> weight_device;
  std::vector<double> sinr_device;
};

std::string csv_header(std::size_t device_count);
void write_csv_row(std::ostream& os, const RoundTrace& row);
void write_csv(std::ostream& os, std::span<const RoundTrace> rows,
               std::size_t device_count);

// "%.17g" rendering used everywhere in the CSV.
std::string format_double(double v);

}  // namespace fedsim::trace
