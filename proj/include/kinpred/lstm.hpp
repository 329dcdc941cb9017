#ifndef KINPRED_LSTM_HPP
#define KINPRED_LSTM_HPP

#include <vector>

#include "kinpred/linalg.hpp"
#include "kinpred/rng.hpp"

namespace kinpred {

/// One LSTM layer. Gate order along the 4H axis is [input, forget, cell,
/// output]. Weights are kept in two layouts: wxt/wht (in x 4H, hid x 4H)
/// are canonical and what the optimizer updates; wx/wh are derived
/// transposes so both forward and backward run the fast axpy kernel.
template <class T>
struct LstmLayer {
    int in = 0, hid = 0;
    Mat<T> wxt, wht;     // canonical: in x 4H, hid x 4H
    std::vector<T> bias; // 4H
    Mat<T> wx, wh;       // derived: 4H x in, 4H x hid

    void init(int input, int hidden, Rng& rng) {
        in = input;
        hid = hidden;
        wxt.resize(in, 4 * hid);
        wht.resize(hid, 4 * hid);
        bias.assign(4 * hid, T(0));
        const double bound = 1.0 / std::sqrt(double(hid));
        for (auto& w : wxt.v) w = T(rng.uniform(-bound, bound));
        for (auto& w : wht.v) w = T(rng.uniform(-bound, bound));
        for (int j = hid; j < 2 * hid; ++j) bias[j] = T(1); // open the forget gate
        refresh_transposes();
    }

    void refresh_transposes() {
        wx.resize(4 * hid, in);
        wh.resize(4 * hid, hid);
        for (int d = 0; d < in; ++d)
            for (int g = 0; g < 4 * hid; ++g) wx(g, d) = wxt(d, g);
        for (int d = 0; d < hid; ++d)
            for (int g = 0; g < 4 * hid; ++g) wh(g, d) = wht(d, g);
    }

    std::size_t param_count() const { return wxt.size() + wht.size() + bias.size(); }
};

template <class T>
struct LstmLayerGrad {
    Mat<T> wxt, wht;
    std::vector<T> bias;

    void match(const LstmLayer<T>& l) {
        wxt.resize(l.in, 4 * l.hid);
        wht.resize(l.hid, 4 * l.hid);
        bias.assign(std::size_t(4) * l.hid, T(0));
    }
    void zero() {
        wxt.zero();
        wht.zero();
        std::fill(bias.begin(), bias.end(), T(0));
    }
};

/// Per-step activations of a stacked forward pass, kept for BPTT.
template <class T>
struct LstmCache {
    // [layer][step] matrices of batch rows
    std::vector<std::vector<Mat<T>>> gates;  // B x 4H, post-nonlinearity
    std::vector<std::vector<Mat<T>>> cell;   // B x H
    std::vector<std::vector<Mat<T>>> tanh_c; // B x H
    std::vector<std::vector<Mat<T>>> hidden; // B x H

    void prepare(const std::vector<LstmLayer<T>>& layers, int steps, int batch) {
        const std::size_t nl = layers.size();
        gates.resize(nl);
        cell.resize(nl);
        tanh_c.resize(nl);
        hidden.resize(nl);
        for (std::size_t l = 0; l < nl; ++l) {
            gates[l].resize(steps);
            cell[l].resize(steps);
            tanh_c[l].resize(steps);
            hidden[l].resize(steps);
            for (int t = 0; t < steps; ++t) {
                gates[l][t].resize(batch, 4 * layers[l].hid);
                cell[l][t].resize(batch, layers[l].hid);
                tanh_c[l][t].resize(batch, layers[l].hid);
                hidden[l][t].resize(batch, layers[l].hid);
            }
        }
    }
};

/// Stacked forward from zero initial state. input is one Mat (B x D) per
/// step. Returns the top layer's final hidden state.
template <class T>
const Mat<T>& lstm_forward(const std::vector<LstmLayer<T>>& layers,
                           const std::vector<Mat<T>>& input, LstmCache<T>& cache) {
    const int steps = int(input.size());
    const int batch = input[0].rows;
    cache.prepare(layers, steps, batch);

    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LstmLayer<T>& ly = layers[l];
        const int h = ly.hid;
        for (int t = 0; t < steps; ++t) {
            const Mat<T>& x = l == 0 ? input[t] : cache.hidden[l - 1][t];
            Mat<T>& z = cache.gates[l][t];
            broadcast_rows(z, ly.bias);
            matmul_nn_acc(z, x, ly.wxt);
            if (t > 0) matmul_nn_acc(z, cache.hidden[l][t - 1], ly.wht);

            Mat<T>& c = cache.cell[l][t];
            Mat<T>& tc = cache.tanh_c[l][t];
            Mat<T>& hd = cache.hidden[l][t];
            const Mat<T>* c_prev = t > 0 ? &cache.cell[l][t - 1] : nullptr;
            // Contiguous sweeps per gate block keep the exp loop
            // vectorized.
            for (int b = 0; b < batch; ++b) {
                T* zb = z.row(b);
                for (int j = 0; j < 2 * h; ++j) zb[j] = sigmoid(zb[j]); // i, f
                for (int j = 2 * h; j < 3 * h; ++j) zb[j] = tanh_approx(zb[j]); // g
                for (int j = 3 * h; j < 4 * h; ++j) zb[j] = sigmoid(zb[j]); // o
                T* cb = c.row(b);
                T* tb = tc.row(b);
                T* hb = hd.row(b);
                if (const T* cp = c_prev ? c_prev->row(b) : nullptr) {
                    for (int j = 0; j < h; ++j)
                        cb[j] = zb[h + j] * cp[j] + zb[j] * zb[2 * h + j];
                } else {
                    for (int j = 0; j < h; ++j) cb[j] = zb[j] * zb[2 * h + j];
                }
                for (int j = 0; j < h; ++j) tb[j] = tanh_approx(cb[j]);
                for (int j = 0; j < h; ++j) hb[j] = zb[3 * h + j] * tb[j];
            }
        }
    }
    return cache.hidden.back().back();
}

/// Scratch buffers reused across backward calls.
template <class T>
struct LstmWorkspace {
    Mat<T> dz, dc, dh;
    std::vector<std::vector<Mat<T>>> dx; // [layer][step], gradient w.r.t. layer input
};

/// Full BPTT for the stacked pass recorded in cache. dh_top carries the
/// external gradient on the top layer's hidden state per step (zero-fill
/// all but the last for many-to-one). Parameter gradients accumulate into
/// grads; the gradient w.r.t. the bottom input ends up in ws.dx[0] when
/// want_input_grad is set.
template <class T>
void lstm_backward(const std::vector<LstmLayer<T>>& layers,
                   const std::vector<Mat<T>>& input, const LstmCache<T>& cache,
                   const std::vector<Mat<T>>& dh_top,
                   std::vector<LstmLayerGrad<T>>& grads, LstmWorkspace<T>& ws,
                   bool want_input_grad) {
    const int steps = int(input.size());
    const int batch = input[0].rows;
    const std::size_t nl = layers.size();

    ws.dx.resize(nl);
    for (std::size_t l = 0; l < nl; ++l) {
        const int d_in = layers[l].in;
        ws.dx[l].resize(steps);
        for (int t = 0; t < steps; ++t) ws.dx[l][t].resize(batch, d_in);
    }

    for (int li = int(nl) - 1; li >= 0; --li) {
        const LstmLayer<T>& ly = layers[li];
        const int h = ly.hid;
        ws.dz.resize(batch, 4 * h);
        ws.dc.resize(batch, h);
        ws.dh.resize(batch, h);
        ws.dc.zero();
        ws.dh.zero();

        for (int t = steps - 1; t >= 0; --t) {
            // External gradient: top layer from the caller, lower layers
            // from the input gradient of the layer above.
            const Mat<T>& ext = li == int(nl) - 1 ? dh_top[t] : ws.dx[li + 1][t];
            const Mat<T>& z = cache.gates[li][t];
            const Mat<T>& tc = cache.tanh_c[li][t];
            const Mat<T>* c_prev = t > 0 ? &cache.cell[li][t - 1] : nullptr;

            for (int b = 0; b < batch; ++b) {
                const T* zb = z.row(b);
                const T* tb = tc.row(b);
                const T* eb = ext.row(b);
                T* dhb = ws.dh.row(b);
                T* dcb = ws.dc.row(b);
                T* dzb = ws.dz.row(b);
                const T* cp = c_prev ? c_prev->row(b) : nullptr;
                if (cp) {
                    for (int j = 0; j < h; ++j) {
                        const T gi = zb[j], gf = zb[h + j], gg = zb[2 * h + j],
                                go = zb[3 * h + j];
                        const T dht = dhb[j] + eb[j];
                        const T dco = dcb[j] + dht * go * (T(1) - tb[j] * tb[j]);
                        dzb[j] = dco * gg * gi * (T(1) - gi);
                        dzb[h + j] = dco * cp[j] * gf * (T(1) - gf);
                        dzb[2 * h + j] = dco * gi * (T(1) - gg * gg);
                        dzb[3 * h + j] = dht * tb[j] * go * (T(1) - go);
                        dcb[j] = dco * gf; // becomes dc_{t-1}
                    }
                } else {
                    for (int j = 0; j < h; ++j) {
                        const T gi = zb[j], gf = zb[h + j], gg = zb[2 * h + j],
                                go = zb[3 * h + j];
                        const T dht = dhb[j] + eb[j];
                        const T dco = dcb[j] + dht * go * (T(1) - tb[j] * tb[j]);
                        dzb[j] = dco * gg * gi * (T(1) - gi);
                        dzb[h + j] = T(0); // df is zero without a previous cell
                        dzb[2 * h + j] = dco * gi * (T(1) - gg * gg);
                        dzb[3 * h + j] = dht * tb[j] * go * (T(1) - go);
                        dcb[j] = dco * gf;
                    }
                }
            }

            const Mat<T>& x = li == 0 ? input[t] : cache.hidden[li - 1][t];
            matmul_tn_acc(grads[li].wxt, x, ws.dz);
            if (t > 0) matmul_tn_acc(grads[li].wht, cache.hidden[li][t - 1], ws.dz);
            colsum_acc(grads[li].bias, ws.dz);

            if (li > 0 || want_input_grad) {
                ws.dx[li][t].zero();
                matmul_nn_acc(ws.dx[li][t], ws.dz, ly.wx);
            }
            ws.dh.zero();
            if (t > 0) matmul_nn_acc(ws.dh, ws.dz, ly.wh); // dh_{t-1}
        }
    }
}

} // namespace kinpred

#endif
