#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slip {

struct HardwareSpec {
    double flops_per_sec = 1e12;
    double utilization = 1.0; // in (0, 1]
};

struct NetworkSpec {
    double bandwidth_bytes_per_sec = 25e6;
    double delay_sec = 0.035;   // one-way network delay charged per transfer block
    uint32_t bytes_per_value = 4;
};

struct ModelShape {
    uint64_t l = 1;   // total layers
    uint64_t l_d = 0; // decomposed layers
    uint64_t n = 1;   // layer input width
    uint64_t m = 1;   // layer output width
    uint64_t b = 1;   // batch size
    uint64_t k = 2;   // withheld singular components per decomposed layer
    uint64_t l_v = 1; // sampled noise vectors
};

struct FlopsBreakdown {
    uint64_t flops_edge = 0;
    uint64_t flops_cloud = 0;
    uint64_t flops_full = 0;
    uint64_t transfer_values = 0;
};

struct PhaseCost {
    std::string phase;
    std::string op_type;   // "compute" or "transfer"
    std::string frequency; // "once" or "per decomposed layer" etc.
    double amount = 0.0;   // FLOPs for compute, values for transfer
};

struct CostReport {
    FlopsBreakdown flops;
    double t_edge_sec = 0.0;
    double t_cloud_sec = 0.0;
    double t_transfer_sec = 0.0;
    double t_total_sec = 0.0;
    double cloud_offload_fraction = 0.0; // flops_cloud / flops_full
    std::vector<PhaseCost> phases;
    bool lambda_per_layer = false;
};

/// FLOPs / (hardware FLOP/s * utilization).
double t_compute(double flops, const HardwareSpec& hw);

/// delay + values * bytes_per_value / bandwidth.
double t_transfer(double values, const NetworkSpec& net);

/// Closed-form counts:
///   edge  = 2mnb*l + nb*(l - l_d)
///   full  = 2mnb*l + nb*l
///   cloud = 2*l_d*b*(mk + nk + 2n*l_v + 1.5n)
///   transfer values = nb*(2*l_d + 1)
FlopsBreakdown flops_breakdown(const ModelShape& shape);

/// Full report; `lambda_per_layer` charges the network delay once per
/// decomposed-layer round trip instead of once per total transfer.
CostReport total_latency(const ModelShape& shape, const HardwareSpec& edge,
                         const HardwareSpec& cloud, const NetworkSpec& net,
                         bool lambda_per_layer = false);

/// Published reference analysis this calculator is checked against: a
/// feed-forward reading of a 32-block model split in 10 blocks.
ModelShape reference_shape();
HardwareSpec reference_edge_hw();  // 4 TFLOP/s at 40%
HardwareSpec reference_cloud_hw(); // 14 TFLOP/s at 40%
NetworkSpec reference_network();   // 25 MB/s, 35 ms, fp32 values

/// Figures printed in the published performance table. The input-transfer
/// count and transfer latency there are not derivable from the stated
/// formulas; reports must show both and flag the discrepancy.
struct ReferencePerformance {
    double flops_full = 240.547e9;
    double flops_edge = 240.538e9;
    double flops_cloud = 3.697e9;
    double input_transfer_values = 1.848e6;
    double t_edge_sec = 150.34e-3;
    double t_cloud_sec = 0.66e-3;
    double t_transfer_sec = 71.31e-3;
    double t_total_sec = 222.31e-3;
};

ReferencePerformance reference_performance();

} // namespace slip
