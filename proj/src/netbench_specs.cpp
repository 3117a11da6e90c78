#include "flowstrain/netbench.hpp"

namespace flowstrain {

// Keep in sync with specs/*.arch; a unit test compares them byte for byte.
const std::map<std::string, std::string> &builtin_spec_texts() {
    static const std::map<std::string, std::string> texts{
        {"voxelmorph", R"arch(# VoxelMorph U-Net: stride-2 encoder 16/32/32/32, mirrored 32-channel decoder
# with skips, then 32, 16, 16 full-resolution refinement and the flow head.
input 2
conv 16 s2
conv 32 s2
conv 32 s2
conv 32 s2
conv 32
upsample
concat 4
conv 32
upsample
concat 3
conv 32
upsample
concat 2
conv 32
upsample
concat 1
conv 32
conv 16
conv 16
output
)arch"},
        {"voxelmorph_lite", R"arch(# VoxelMorph with the two 16-channel full-resolution refinement layers removed.
input 2
conv 16 s2
conv 32 s2
conv 32 s2
conv 32 s2
conv 32
upsample
concat 4
conv 32
upsample
concat 3
conv 32
upsample
concat 2
conv 32
upsample
concat 1
conv 32
output
)arch"},
        {"flir_unet", R"arch(# One FLIR cascade. Encoder: three stride-2 layers from 16 channels, then
# stride 1/2 pairs, doubling width whenever resolution halves. The 1/32 block
# is omitted because a 16-slice input cannot be halved five times and
# upsampled back to matching shapes. Each decoder level doubles the width of
# the encoder level it concatenates; the last 16-channel layer runs at full
# resolution before the 3-channel head.
input 2
conv 16 s2
conv 32 s2
conv 64 s2
conv 64
conv 128 s2
conv 128
upsample
concat 5
conv 128
upsample
concat 3
conv 64
upsample
concat 2
conv 32
upsample
concat 1
conv 16
output
)arch"},
    };
    return texts;
}

}  // namespace flowstrain
