name = "helmscatter"
