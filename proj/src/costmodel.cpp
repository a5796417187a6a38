#include "slip/costmodel.hpp"

#include "slip/errors.hpp"

namespace slip {

double t_compute(double flops, const HardwareSpec& hw) {
    if (flops < 0.0) throw DomainError("t_compute: negative FLOPs");
    if (hw.flops_per_sec <= 0.0 || hw.utilization <= 0.0 || hw.utilization > 1.0)
        throw DomainError("t_compute: invalid hardware spec");
    return flops / (hw.flops_per_sec * hw.utilization);
}

double t_transfer(double values, const NetworkSpec& net) {
    if (net.bandwidth_bytes_per_sec <= 0.0 || net.delay_sec < 0.0 || net.bytes_per_value == 0)
        throw DomainError("t_transfer: invalid network spec");
    return net.delay_sec +
           values * static_cast<double>(net.bytes_per_value) / net.bandwidth_bytes_per_sec;
}

FlopsBreakdown flops_breakdown(const ModelShape& s) {
    if (s.l_d > s.l) throw DomainError("flops_breakdown: l_d > l");
    if (s.l == 0 || s.n == 0 || s.m == 0 || s.b == 0)
        throw DomainError("flops_breakdown: zero dimension");
    FlopsBreakdown out;
    out.flops_edge = 2 * s.m * s.n * s.b * s.l + s.n * s.b * (s.l - s.l_d);
    out.flops_full = 2 * s.m * s.n * s.b * s.l + s.n * s.b * s.l;
    // 2*l_d*b*(mk + nk + 2n*l_v + 1.5n); the 1.5n term kept integral as 3n/2
    out.flops_cloud =
        2 * s.l_d * s.b * (s.m * s.k + s.n * s.k + 2 * s.n * s.l_v) + 3 * s.l_d * s.b * s.n;
    out.transfer_values = s.n * s.b * (2 * s.l_d + 1);
    return out;
}

CostReport total_latency(const ModelShape& shape, const HardwareSpec& edge,
                         const HardwareSpec& cloud, const NetworkSpec& net,
                         bool lambda_per_layer) {
    CostReport r;
    r.flops = flops_breakdown(shape);
    r.lambda_per_layer = lambda_per_layer;
    r.t_edge_sec = t_compute(static_cast<double>(r.flops.flops_edge), edge);
    r.t_cloud_sec = t_compute(static_cast<double>(r.flops.flops_cloud), cloud);
    if (lambda_per_layer) {
        // one delay per decomposed-layer round trip plus the input upload
        double blocks = static_cast<double>(2 * shape.l_d + 1);
        r.t_transfer_sec =
            blocks * net.delay_sec + static_cast<double>(r.flops.transfer_values) *
                                         static_cast<double>(net.bytes_per_value) /
                                         net.bandwidth_bytes_per_sec;
    } else {
        r.t_transfer_sec = t_transfer(static_cast<double>(r.flops.transfer_values), net);
    }
    r.t_total_sec = r.t_edge_sec + r.t_cloud_sec + r.t_transfer_sec;
    r.cloud_offload_fraction =
        static_cast<double>(r.flops.flops_cloud) / static_cast<double>(r.flops.flops_full);

    const double nb = static_cast<double>(shape.n * shape.b);
    const double mnb2 = static_cast<double>(2 * shape.m * shape.n * shape.b);
    const double ld = static_cast<double>(shape.l_d);
    const double lnd = static_cast<double>(shape.l - shape.l_d);
    r.phases = {
        {"upload_input", "transfer", "once", nb},
        {"edge_only_compute", "compute", "per non-decomposed layer",
         lnd * (mnb2 + nb)},
        {"edge_partial_compute", "compute", "per decomposed layer", ld * mnb2},
        {"cloud_partial_compute", "compute", "per decomposed layer",
         ld * 2.0 * static_cast<double>(shape.k * shape.b) *
             static_cast<double>(shape.m + shape.n)},
        {"upload_edge_to_cloud", "transfer", "per decomposed layer", ld * nb},
        {"cloud_activation", "compute", "per decomposed layer",
         ld * 2.0 * nb * static_cast<double>(shape.l_v + 1)},
        {"cloud_noise_generation", "compute", "per decomposed layer",
         ld * 2.0 * nb * static_cast<double>(shape.l_v)},
        {"cloud_noise_addition", "compute", "per decomposed layer", ld * nb},
        {"activation_download", "transfer", "per decomposed layer", ld * nb},
    };
    return r;
}

ModelShape reference_shape() {
    ModelShape s;
    s.l = 224;
    s.l_d = 70;
    s.n = 4096;
    s.m = 4096;
    s.b = 32;
    s.k = 50;
    s.l_v = 50;
    return s;
}

HardwareSpec reference_edge_hw() { return HardwareSpec{4e12, 0.40}; }
HardwareSpec reference_cloud_hw() { return HardwareSpec{14e12, 0.40}; }
NetworkSpec reference_network() { return NetworkSpec{25e6, 0.035, 4}; }

ReferencePerformance reference_performance() { return ReferencePerformance{}; }

} // namespace slip
