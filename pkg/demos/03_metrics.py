"""
Scoring a generated map against the real one
============================================

Three lenses, three failure modes: SSIM sees overall structure, ESSI
sees edge structure (SSIM over Sobel gradient magnitudes), and class IOU
sees whether specific map classes land on the right pixels.
"""

import numpy as np

from rs2map import Palette, class_iou, essi, palette_project, ssim
from rs2map.generators import box_blur

PALETTE = Palette((("background", (0, 0, 0)),
                   ("road", (255, 255, 255)),
                   ("water", (0, 0, 255))))

# A toy "real map": black ground, one road band, one water block.
real = np.zeros((64, 64, 3), dtype=np.uint8)
real[28:36, :] = (255, 255, 255)
real[48:64, 40:64] = (0, 0, 255)

print("identical images are the fixed point of every metric:")
print(f"  ssim={ssim(real, real):.4f}  essi={essi(real, real):.4f}  "
      f"iou={class_iou(real, real, PALETTE)}")

# Blur the map a little: SSIM dips, but ESSI drops much harder because
# blurring eats exactly the edges it looks at.
soft = box_blur(real, 2)
print("\nafter a light blur:")
print(f"  ssim={ssim(real, soft):.4f}  essi={essi(real, soft):.4f}")

# Projecting the blurred map back onto the palette recovers crisp classes,
# but the road has fattened: IOU counts every misplaced pixel.
snapped = palette_project(soft, PALETTE)
print("\nblurred then snapped back to palette colors:")
print(f"  iou={class_iou(real, snapped, PALETTE)}")

# Shift the road four pixels: structure is nearly intact to SSIM, but the
# road's IOU collapses because overlap is what it measures.
shifted = np.zeros_like(real)
shifted[32:40, :] = (255, 255, 255)
shifted[48:64, 40:64] = (0, 0, 255)
print("\nroad drawn four pixels south of where it belongs:")
print(f"  ssim={ssim(real, shifted):.4f}  iou={class_iou(real, shifted, PALETTE)}")

# A class absent from both images has no defined IOU: that's None, not 1.
no_water_a = real.copy(); no_water_a[48:64, 40:64] = 0
no_water_b = shifted.copy(); no_water_b[48:64, 40:64] = 0
print("\nwater absent from both sides:")
print(f"  iou={class_iou(no_water_a, no_water_b, PALETTE)}")
