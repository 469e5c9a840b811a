#include "sdcnpu/npu/simulator.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

// Timing model (one step per cycle, output-stationary):
//   layer start    1 cycle   host loads the 8 layer-config registers (IDLE)
//   per tile       1 cycle   TILE: clear accumulators, arm DMA/WD pointers
//                  3 cycles  per reduction step: FETCH, LATCH, MAC
//                  3 cycles  per valid output cell: DRAIN_LD, DRAIN_ACT, DRAIN_WR
// Rows of the array map to consecutive output x positions of one output row,
// columns to consecutive output channels.

namespace sdcnpu::npu
{

namespace
{

enum Fsm : std::uint32_t
{
    kIdle = 0x00,
    kTile = 0x01,
    kFetch = 0x02,
    kLatch = 0x04,
    kMac = 0x08,
    kDrainLoad = 0x10,
    kDrainAct = 0x20,
    kDrainWrite = 0x40,
};

enum Op : std::uint32_t
{
    kOpDense = 1,
    kOpConv3x3 = 2,
};

using Descriptor = std::array<std::uint32_t, kLayerConfigRegisters>;

struct Program
{
    std::vector<Descriptor> descriptors;
    std::vector<std::uint8_t> image;
    std::uint32_t input_addr = 0;
    std::uint32_t output_addr = 0;
    std::uint32_t output_size = 0;
};

std::uint32_t align4(std::uint32_t x) { return (x + 3u) & ~3u; }

std::uint32_t pack_shape(const Shape& s) { return s.h | (s.w << 8) | (s.c << 16); }

Program compile(const NpuModel& model, const Workload& wl)
{
    const auto plans = plan_layers(wl);
    const std::uint32_t cols = model.config().mac_cols;

    std::uint64_t next = 0;
    std::vector<std::uint32_t> weight_addr, bias_addr, out_addr;
    for (const auto& p : plans)
    {
        next = align4(static_cast<std::uint32_t>(next));
        weight_addr.push_back(static_cast<std::uint32_t>(next));
        const std::uint64_t tiles = (p.out.c + cols - 1) / cols;
        next += tiles * p.reduction * 4;
    }
    for (const auto& p : plans)
    {
        next = align4(static_cast<std::uint32_t>(next));
        bias_addr.push_back(static_cast<std::uint32_t>(next));
        next += std::uint64_t{4} * p.out.c;
    }
    const auto input_addr = static_cast<std::uint32_t>(next);
    next += wl.input_shape.size();
    for (const auto& p : plans)
    {
        out_addr.push_back(static_cast<std::uint32_t>(next));
        next += p.out.size();
    }
    if (next > model.config().buffer_bytes)
        throw ConfigError("npu.buffer_bytes", fmt::format("workload '{}' needs {} bytes of shared buffer, have {}",
                                                          wl.name, next, model.config().buffer_bytes));

    Program prog;
    prog.image.assign(model.config().buffer_bytes, 0);
    prog.input_addr = input_addr;
    for (std::size_t i = 0; i < plans.size(); ++i)
    {
        const auto& p = plans[i];
        const Layer& layer = wl.layers[p.layer_index];
        const std::uint32_t tiles = (p.out.c + cols - 1) / cols;
        for (std::uint32_t t = 0; t < tiles; ++t)
            for (std::uint32_t k = 0; k < p.reduction; ++k)
                for (std::uint32_t c = 0; c < cols; ++c)
                {
                    const std::uint32_t oc = t * cols + c;
                    if (oc < p.out.c)
                        prog.image[weight_addr[i] + (std::size_t{t} * p.reduction + k) * 4 + c] =
                            static_cast<std::uint8_t>(layer.weights[std::size_t{oc} * p.reduction + k]);
                }
        for (std::uint32_t oc = 0; oc < p.out.c; ++oc)
        {
            const auto b = static_cast<std::uint32_t>(layer.bias[oc]);
            for (int byte = 0; byte < 4; ++byte)
                prog.image[bias_addr[i] + 4 * oc + byte] = static_cast<std::uint8_t>(b >> (8 * byte));
        }

        Descriptor d{};
        d[0] = (p.kind == LayerKind::Dense ? kOpDense : kOpConv3x3) | (p.relu ? 1u << 4 : 0u) | (p.shift << 8);
        d[1] = i == 0 ? input_addr : out_addr[i - 1];
        d[2] = out_addr[i];
        d[3] = weight_addr[i];
        d[4] = bias_addr[i];
        d[5] = pack_shape(p.in);
        d[6] = pack_shape(p.out);
        d[7] = 0; // reserved
        prog.descriptors.push_back(d);
    }
    prog.output_addr = out_addr.back();
    prog.output_size = static_cast<std::uint32_t>(plans.back().out.size());
    return prog;
}

struct State
{
    std::vector<std::uint32_t> regs;
    std::vector<std::uint8_t> buf;
    std::uint32_t layer_idx = 0;

    friend bool operator==(const State&, const State&) = default;

    std::size_t bytes() const noexcept { return regs.size() * 4 + buf.size() + sizeof(layer_idx); }
};

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n)
{
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i)
        h = (h ^ p[i]) * kFnvPrime;
    return h;
}

std::uint64_t digest(const State& s)
{
    std::uint64_t h = kFnvOffset;
    h = fnv1a(h, s.regs.data(), s.regs.size() * sizeof(std::uint32_t));
    h = fnv1a(h, s.buf.data(), s.buf.size());
    return fnv1a(h, &s.layer_idx, sizeof(s.layer_idx));
}

std::uint64_t combine(std::uint64_t acc, std::uint64_t d) { return fnv1a(acc, &d, sizeof(d)); }

std::uint64_t fingerprint(const NpuModel& model, const Workload& wl)
{
    std::uint64_t h = kFnvOffset;
    const auto& cfg = model.config();
    const std::array<std::uint32_t, 3> dims{cfg.mac_rows, cfg.mac_cols, cfg.buffer_bytes};
    h = fnv1a(h, dims.data(), sizeof(dims));
    for (const auto& r : model.registers())
        h = fnv1a(h, &r.width_bits, sizeof(r.width_bits));
    for (const auto& l : wl.layers)
    {
        const std::array<std::uint32_t, 3> hdr{static_cast<std::uint32_t>(l.kind), l.out, l.shift};
        h = fnv1a(h, hdr.data(), sizeof(hdr));
        h = fnv1a(h, l.weights.data(), l.weights.size());
        h = fnv1a(h, l.bias.data(), l.bias.size() * sizeof(std::int32_t));
    }
    for (const auto& in : wl.inputs)
        h = fnv1a(h, in.data(), in.size());
    return h;
}

std::uint32_t top1(const Program& prog, const State& s)
{
    std::uint32_t best = 0;
    auto best_value = static_cast<std::int8_t>(s.buf[prog.output_addr]);
    for (std::uint32_t i = 1; i < prog.output_size; ++i)
    {
        const auto v = static_cast<std::int8_t>(s.buf[prog.output_addr + i]);
        if (v > best_value)
        {
            best = i;
            best_value = v;
        }
    }
    return best;
}

/// Layer configuration decoded from the REG block each cycle.
struct LayerConfig
{
    std::uint32_t op, shift, zero_point;
    bool relu;
    std::uint32_t in_addr, out_addr, weight_addr, bias_addr;
    std::uint32_t in_w, in_c, out_h, out_w, out_c;
    std::uint32_t reduction, x_tiles, row_tiles, col_tiles;
};

class Machine
{
  public:
    Machine(const NpuModel& model, const Program& prog)
        : m_(model.map()), prog_(prog), rows_(model.config().mac_rows), cols_(model.config().mac_cols)
    {
        for (const auto& r : model.registers())
            masks_.push_back(r.width_bits == 32 ? 0xFFFFFFFFu : (1u << r.width_bits) - 1u);
    }

    State initial(const std::vector<std::int8_t>& input) const
    {
        State s;
        s.regs.assign(masks_.size(), 0);
        s.buf = prog_.image;
        std::memcpy(s.buf.data() + prog_.input_addr, input.data(), input.size());
        return s;
    }

    bool finished(const State& s) const
    {
        return s.regs[m_.tsu_fsm_state] == kIdle && s.layer_idx >= prog_.descriptors.size();
    }

    void flip(State& s, std::size_t reg, std::uint32_t bit) const { s.regs[reg] ^= 1u << bit; }

    std::optional<CrashReason> step(State& s) const
    {
        s_ = &s;
        const std::uint32_t fsm = get(m_.tsu_fsm_state);
        if (fsm == kIdle)
        {
            const Descriptor& d = prog_.descriptors[s.layer_idx++];
            for (std::size_t i = 0; i < d.size(); ++i)
                set(m_.cfg(i), d[i]);
            set(m_.tsu_row_cnt, 0);
            set(m_.tsu_col_cnt, 0);
            set(m_.tsu_fsm_state, kTile);
            return std::nullopt;
        }

        const auto cfg = decode();
        if (!cfg)
            return CrashReason::IllegalState;
        const LayerConfig& L = *cfg;

        const std::uint32_t row_cnt = get(m_.tsu_row_cnt);
        const std::uint32_t col_cnt = get(m_.tsu_col_cnt);
        const std::uint32_t oy = row_cnt / L.x_tiles;
        const std::uint32_t ox_base = (row_cnt % L.x_tiles) * rows_;
        const std::uint32_t oc_base = col_cnt * cols_;
        const std::uint32_t valid_rows = ox_base < L.out_w ? std::min(rows_, L.out_w - ox_base) : 0;
        const std::uint32_t valid_cols = oc_base < L.out_c ? std::min(cols_, L.out_c - oc_base) : 0;

        auto row0_addr = [&](std::uint64_t k) -> std::uint64_t {
            if (L.op == kOpDense)
                return std::uint64_t{L.in_addr} + k;
            const std::uint64_t ci = k % L.in_c;
            const std::uint64_t kx = (k / L.in_c) % 3;
            const std::uint64_t ky = k / (3 * std::uint64_t{L.in_c});
            return L.in_addr + ((oy + ky) * L.in_w + ox_base + kx) * L.in_c + ci;
        };

        switch (fsm)
        {
        case kTile:
            for (std::size_t cell = 0; cell < std::size_t{rows_} * cols_; ++cell)
                set(m_.acc(cell), 0);
            set(m_.tsu_chan_cnt, 0);
            set(m_.dma_burst_cnt, L.reduction);
            set(m_.dma_src_addr, static_cast<std::uint32_t>(row0_addr(0)));
            set(m_.wd_wbuf_ptr, L.weight_addr + col_cnt * L.reduction * 4);
            set(m_.wd_weight_latch, L.zero_point);
            set(m_.tsu_fsm_state, kFetch);
            return std::nullopt;

        case kFetch: {
            std::uint32_t word = 0;
            for (std::uint32_t r = 0; r < valid_rows; ++r)
            {
                const std::uint64_t a = std::uint64_t{get(m_.dma_src_addr)} + std::uint64_t{r} * L.in_c;
                if (a >= s.buf.size())
                    return CrashReason::InvalidAccess;
                word |= std::uint32_t{s.buf[a]} << (8 * r);
            }
            const std::uint64_t w = get(m_.wd_wbuf_ptr);
            if (w + 4 > s.buf.size())
                return CrashReason::InvalidAccess;
            set(m_.dma_data_latch, word);
            set(m_.wd_decode_shift, load32(w));
            set(m_.dma_burst_cnt, get(m_.dma_burst_cnt) - 1);
            set(m_.tsu_fsm_state, kLatch);
            return std::nullopt;
        }

        case kLatch: {
            const std::uint32_t act = get(m_.dma_data_latch);
            const std::uint32_t wts = get(m_.wd_decode_shift);
            const std::uint32_t zp = get(m_.wd_weight_latch);
            for (std::uint32_t r = 0; r < rows_; ++r)
                for (std::uint32_t c = 0; c < cols_; ++c)
                {
                    const std::size_t cell = std::size_t{r} * cols_ + c;
                    set(m_.a_latch(cell), (act >> (8 * r)) & 0xFFu);
                    set(m_.w_latch(cell), (((wts >> (8 * c)) & 0xFFu) - zp) & 0xFFu);
                }
            const std::uint32_t chan = get(m_.tsu_chan_cnt) + 1;
            set(m_.tsu_chan_cnt, chan);
            set(m_.wd_wbuf_ptr, get(m_.wd_wbuf_ptr) + 4);
            set(m_.dma_src_addr, static_cast<std::uint32_t>(row0_addr(get(m_.tsu_chan_cnt))));
            set(m_.tsu_fsm_state, kMac);
            return std::nullopt;
        }

        case kMac:
            for (std::size_t cell = 0; cell < std::size_t{rows_} * cols_; ++cell)
            {
                const auto a = static_cast<std::int8_t>(get(m_.a_latch(cell)));
                const auto w = static_cast<std::int8_t>(get(m_.w_latch(cell)));
                const std::uint32_t acc = get(m_.acc(cell)) + static_cast<std::uint32_t>(std::int32_t{a} * w);
                set(m_.acc(cell), acc);
            }
            if (get(m_.dma_burst_cnt) != 0)
            {
                set(m_.tsu_fsm_state, kFetch);
                return std::nullopt;
            }
            if (valid_rows * valid_cols == 0)
                return advance_tile(L);
            set(m_.tsu_chan_cnt, 0);
            set(m_.dma_burst_cnt, valid_rows * valid_cols);
            set(m_.tsu_fsm_state, kDrainLoad);
            return std::nullopt;

        case kDrainLoad: {
            if (valid_cols == 0)
                return CrashReason::IllegalState;
            const std::uint32_t d = get(m_.tsu_chan_cnt);
            const std::uint32_t r = d / valid_cols;
            const std::uint32_t c = d % valid_cols;
            if (r >= rows_)
                return CrashReason::IllegalState;
            const std::uint64_t oc = std::uint64_t{oc_base} + c;
            const std::uint64_t bias_at = L.bias_addr + 4 * oc;
            if (bias_at + 4 > s.buf.size())
                return CrashReason::InvalidAccess;
            set(m_.ao_act_in, get(m_.acc(std::size_t{r} * cols_ + c)));
            set(m_.ao_bias, load32(bias_at));
            const std::uint64_t dst = L.out_addr + ((std::uint64_t{oy} * L.out_w + ox_base + r) * L.out_c + oc);
            set(m_.dma_dst_addr, static_cast<std::uint32_t>(dst));
            set(m_.tsu_fsm_state, kDrainAct);
            return std::nullopt;
        }

        case kDrainAct: {
            const std::int32_t sum = static_cast<std::int32_t>(get(m_.ao_act_in) + get(m_.ao_bias));
            std::int32_t v = sum >> L.shift;
            v = std::clamp(v, L.relu ? 0 : -128, 127);
            set(m_.ao_act_out, static_cast<std::uint8_t>(static_cast<std::int8_t>(v)));
            set(m_.tsu_fsm_state, kDrainWrite);
            return std::nullopt;
        }

        case kDrainWrite: {
            const std::uint64_t dst = get(m_.dma_dst_addr);
            if (dst >= s.buf.size())
                return CrashReason::InvalidAccess;
            s.buf[dst] = static_cast<std::uint8_t>(get(m_.ao_act_out));
            set(m_.tsu_chan_cnt, get(m_.tsu_chan_cnt) + 1);
            const std::uint32_t remaining = (get(m_.dma_burst_cnt) - 1) & 0xFFFFu;
            set(m_.dma_burst_cnt, remaining);
            if (get(m_.dma_burst_cnt) == 0)
                return advance_tile(L);
            set(m_.tsu_fsm_state, kDrainLoad);
            return std::nullopt;
        }

        default:
            return CrashReason::IllegalState;
        }
    }

  private:
    std::uint32_t get(std::size_t i) const { return s_->regs[i]; }
    void set(std::size_t i, std::uint32_t v) const { s_->regs[i] = v & masks_[i]; }

    std::uint32_t load32(std::uint64_t a) const
    {
        const auto& b = s_->buf;
        return std::uint32_t{b[a]} | std::uint32_t{b[a + 1]} << 8 | std::uint32_t{b[a + 2]} << 16 |
               std::uint32_t{b[a + 3]} << 24;
    }

    std::optional<LayerConfig> decode() const
    {
        LayerConfig L{};
        const std::uint32_t c0 = get(m_.cfg(0));
        L.op = c0 & 0xFu;
        L.relu = (c0 >> 4) & 1u;
        L.shift = (c0 >> 8) & 0x1Fu;
        L.zero_point = (c0 >> 16) & 0xFFu;
        L.in_addr = get(m_.cfg(1));
        L.out_addr = get(m_.cfg(2));
        L.weight_addr = get(m_.cfg(3));
        L.bias_addr = get(m_.cfg(4));
        const std::uint32_t in = get(m_.cfg(5));
        const std::uint32_t out = get(m_.cfg(6));
        L.in_w = (in >> 8) & 0xFFu;
        L.in_c = in >> 16;
        L.out_h = out & 0xFFu;
        L.out_w = (out >> 8) & 0xFFu;
        L.out_c = out >> 16;
        if ((L.op != kOpDense && L.op != kOpConv3x3) || L.in_c == 0 || L.out_h == 0 || L.out_w == 0 || L.out_c == 0)
            return std::nullopt;
        L.reduction = L.op == kOpDense ? L.in_c : 9 * L.in_c;
        L.x_tiles = (L.out_w + rows_ - 1) / rows_;
        L.row_tiles = L.out_h * L.x_tiles;
        L.col_tiles = (L.out_c + cols_ - 1) / cols_;
        return L;
    }

    std::optional<CrashReason> advance_tile(const LayerConfig& L) const
    {
        std::uint32_t col = get(m_.tsu_col_cnt) + 1;
        std::uint32_t row = get(m_.tsu_row_cnt);
        if (col >= L.col_tiles)
        {
            col = 0;
            ++row;
        }
        set(m_.tsu_col_cnt, col);
        set(m_.tsu_row_cnt, row);
        set(m_.tsu_fsm_state, get(m_.tsu_row_cnt) >= L.row_tiles ? kIdle : kTile);
        return std::nullopt;
    }

    const RegisterMap& m_;
    const Program& prog_;
    std::uint32_t rows_, cols_;
    std::vector<std::uint32_t> masks_;
    mutable State* s_ = nullptr;
};

} // namespace

class GoldenTrace
{
  public:
    Program program;
    std::uint64_t workload_fingerprint = 0;
    std::uint64_t interval = 1;
    /// checkpoints[input][j] is the state after j*interval cycles.
    std::vector<std::vector<State>> checkpoints;
    std::vector<std::uint64_t> input_digests;
};

namespace
{

struct Injection
{
    std::size_t reg;
    std::uint32_t bit;
    std::uint64_t cycle;
};

enum class RunEnd
{
    Completed,
    Converged,
    Crashed,
};

struct RunResult
{
    RunEnd end;
    CrashReason reason = CrashReason::Watchdog;
    std::uint64_t cycles = 0;
};

/// Steps `s` from cycle `t` until completion, crash, the watchdog limit, or (with
/// `golden`) a return to the golden state at a checkpoint after the injection.
RunResult run(const Machine& machine, State& s, std::uint64_t t, std::uint64_t limit,
              const std::optional<Injection>& inj, const std::vector<State>* golden, std::uint64_t interval)
{
    for (;; ++t)
    {
        if (machine.finished(s))
            return {RunEnd::Completed, {}, t};
        if (t >= limit)
            return {RunEnd::Crashed, CrashReason::Watchdog, t};
        if (auto crash = machine.step(s))
            return {RunEnd::Crashed, *crash, t};
        if (inj && t == inj->cycle)
            machine.flip(s, inj->reg, inj->bit);
        if (golden && inj && t > inj->cycle && (t + 1) % interval == 0)
        {
            const std::uint64_t j = (t + 1) / interval;
            if (j < golden->size() && (*golden)[j] == s)
                return {RunEnd::Converged, {}, t + 1};
        }
    }
}

std::uint64_t watchdog_limit(const NpuModel& model, std::uint64_t golden_cycles)
{
    return static_cast<std::uint64_t>(model.config().watchdog_factor * static_cast<double>(golden_cycles));
}

} // namespace

std::string_view outcome_name(OutcomeKind k) noexcept
{
    switch (k)
    {
    case OutcomeKind::Masked: return "masked";
    case OutcomeKind::SDC: return "sdc";
    case OutcomeKind::Crash: return "crash";
    }
    return "?";
}

std::string_view crash_reason_name(CrashReason r) noexcept
{
    switch (r)
    {
    case CrashReason::Watchdog: return "watchdog";
    case CrashReason::InvalidAccess: return "invalid_access";
    case CrashReason::IllegalState: return "illegal_state";
    }
    return "?";
}

std::optional<OutcomeKind> parse_outcome(std::string_view s) noexcept
{
    for (auto k : {OutcomeKind::Masked, OutcomeKind::SDC, OutcomeKind::Crash})
        if (outcome_name(k) == s)
            return k;
    return std::nullopt;
}

std::optional<CrashReason> parse_crash_reason(std::string_view s) noexcept
{
    for (auto r : {CrashReason::Watchdog, CrashReason::InvalidAccess, CrashReason::IllegalState})
        if (crash_reason_name(r) == s)
            return r;
    return std::nullopt;
}

GoldenResult run_golden(const NpuModel& model, const Workload& workload, const GoldenOptions& options)
{
    auto trace = std::make_shared<GoldenTrace>();
    trace->program = compile(model, workload);
    trace->workload_fingerprint = fingerprint(model, workload);
    const Machine machine(model, trace->program);

    // Control flow is data independent, so the first input fixes the cycle count
    // and with it the checkpoint interval.
    std::uint64_t cycles = 0;
    {
        State s = machine.initial(workload.inputs.front());
        while (!machine.finished(s))
        {
            if (machine.step(s))
                throw std::logic_error("golden run crashed");
            ++cycles;
        }
    }
    const std::size_t state_bytes = machine.initial(workload.inputs.front()).bytes();
    const std::uint64_t per_input = (cycles + 1) * state_bytes;
    const std::uint64_t total = per_input * workload.inputs.size();
    trace->interval = std::max<std::uint64_t>(1, (total + options.checkpoint_budget_bytes - 1) /
                                                     std::max<std::size_t>(1, options.checkpoint_budget_bytes));

    GoldenResult result;
    result.cycle_count = cycles;
    result.state_digest = kFnvOffset;
    for (const auto& input : workload.inputs)
    {
        std::vector<State> checkpoints;
        State s = machine.initial(input);
        std::uint64_t t = 0;
        for (;; ++t)
        {
            if (t % trace->interval == 0)
                checkpoints.push_back(s);
            if (machine.finished(s))
                break;
            if (machine.step(s))
                throw std::logic_error("golden run crashed");
        }
        if (t != cycles)
            throw std::logic_error("golden cycle count differs between inputs");
        const std::uint64_t d = digest(s);
        trace->input_digests.push_back(d);
        result.state_digest = combine(result.state_digest, d);
        result.top1_labels.push_back(top1(trace->program, s));
        trace->checkpoints.push_back(std::move(checkpoints));
    }
    result.trace = std::move(trace);
    return result;
}

InjectionOutcome run_injected(const NpuModel& model, const Workload& workload, const std::optional<FaultSite>& site,
                              const GoldenResult& golden)
{
    if (!golden.trace)
        throw InputError("golden result carries no trace; produce it with run_golden");
    const GoldenTrace& trace = *golden.trace;
    if (trace.workload_fingerprint != fingerprint(model, workload))
        throw InputError("golden result was produced for a different model or workload");

    std::optional<Injection> inj;
    if (site)
    {
        const std::size_t reg = model.find(site->block, site->reg);
        if (reg == NpuModel::npos)
            throw DomainError(fmt::format("no register '{}' in block {}", site->reg, block_name(site->block)));
        if (site->bit >= model.registers()[reg].width_bits)
            throw DomainError(fmt::format("bit {} out of range for {}.{} ({} bits)", site->bit,
                                          block_name(site->block), site->reg, model.registers()[reg].width_bits));
        if (site->cycle >= golden.cycle_count)
            throw DomainError(fmt::format("cycle {} outside golden run of {} cycles", site->cycle, golden.cycle_count));
        inj = Injection{reg, site->bit, site->cycle};
    }

    const Machine machine(model, trace.program);
    const std::uint64_t limit = watchdog_limit(model, golden.cycle_count);

    InjectionOutcome out;
    std::size_t mismatches = 0;
    std::uint64_t combined = kFnvOffset;
    for (std::size_t i = 0; i < workload.inputs.size(); ++i)
    {
        State s;
        std::uint64_t start = 0;
        const std::vector<State>* checkpoints = nullptr;
        if (inj)
        {
            checkpoints = &trace.checkpoints[i];
            const std::uint64_t j = inj->cycle / trace.interval;
            s = (*checkpoints)[j];
            start = j * trace.interval;
        }
        else
        {
            s = machine.initial(workload.inputs[i]);
        }

        const RunResult r = run(machine, s, start, limit, inj, checkpoints, trace.interval);
        if (r.end == RunEnd::Crashed)
            return {OutcomeKind::Crash, 0.0, r.reason, 0};

        std::uint32_t label = golden.top1_labels[i];
        std::uint64_t d = trace.input_digests[i];
        if (r.end == RunEnd::Completed)
        {
            label = top1(trace.program, s);
            d = digest(s);
        }
        if (label != golden.top1_labels[i])
            ++mismatches;
        combined = combine(combined, d);
    }

    out.state_digest = combined;
    if (mismatches > 0)
    {
        out.kind = OutcomeKind::SDC;
        out.sdc_fraction = static_cast<double>(mismatches) / static_cast<double>(workload.inputs.size());
    }
    return out;
}

PerBlock<std::uint64_t> enumerate_fault_sites(const NpuModel& model, const GoldenResult& golden)
{
    PerBlock<std::uint64_t> n{};
    for (BlockId b : kAllBlocks)
        n[index_of(b)] = model.block_bits(b) * golden.cycle_count;
    return n;
}

FaultSite site_from_index(const NpuModel& model, BlockId b, std::uint64_t index)
{
    const std::uint64_t bits = model.block_bits(b);
    FaultSite site;
    site.block = b;
    site.cycle = index / bits;
    std::uint64_t offset = index % bits;
    for (std::size_t reg : model.block_registers(b))
    {
        const auto& spec = model.registers()[reg];
        if (offset < spec.width_bits)
        {
            site.reg = spec.name;
            site.bit = static_cast<std::uint32_t>(offset);
            return site;
        }
        offset -= spec.width_bits;
    }
    throw std::logic_error("fault-site offset beyond block width");
}

} // namespace sdcnpu::npu
