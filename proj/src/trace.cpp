#include "fedsim/trace.hpp"

#include <cstdio>
#include <ostream>

namespace fedsim::trace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_header(std::size_t device_count) {
  std::string h =
      "t,loss_weighted,loss_union,gap_weighted,gap_union,grad_norm,eps_round,"
      "noise_mode,t_th,selected";
  const char* blocks[] = {"eps", "sigma", "g", "gamma"};
  for (const char* b : blocks)
    for (std::size_t k = 0; k < device_count; ++k)
      h += "," + std::string(b) + "_" + std::to_string(k);
  return h;
}

void write_csv_row(std::ostream& os, const RoundTrace& row) {
  os << row.t << ',' << format_double(row.loss_weighted) << ','
     << format_double(row.loss_union) << ',' << format_double(row.gap_weighted)
     << ',' << format_double(row.gap_union) << ','
     << format_double(row.grad_norm) << ',' << format_double(row.eps_round)
     << ',' << row.noise_mode << ',' << row.t_th << ',' << row.selected_count;
  const std::vector<double>* blocks[] = {&row.eps_device, &row.sigma_device,
                                         &row.weight_device, &row.sinr_device};
  for (const auto* b : blocks)
    for (double v : *b) os << ',' << format_double(v);
  os << '\n';
}

void write_csv(std::ostream& os, std::span<const RoundTrace> rows,
               std::size_t device_count) {
  os << csv_header(device_count) << '\n';
  for (const auto& r : rows) write_csv_row(os, r);
}

}  // namespace fedsim::trace
