# Tests package for the adversarial strings toolkit
